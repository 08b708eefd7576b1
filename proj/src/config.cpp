#include "asm2tv/config.hpp"

#include <fstream>
#include <sstream>

#include "asm2tv/format.hpp"

namespace asm2tv {

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"manifest", "", "dataset manifest JSON"},
        {"window_length", "0", "rows per window; 0 means 5 s at the sample rate"},
        {"stride", "0", "rows between window starts; 0 means the window length"},
        {"unlabeled_ratio", "0", "unlabeled windows per labeled window; 0 keeps the whole split"},
        {"fragment_length", "12", "windows per unlabeled fragment"},
        {"hidden", "64", "hidden width d"},
        {"blocks", "4", "shared blocks N"},
        {"block_depth", "2", "layers per shared block"},
        {"unit_mode", "per-task-view", "gating units: per-task-view or per-view"},
        {"dropout", "0.5", "dropout probability"},
        {"architecture", "asm", "asm, single-task or share-all"},
        {"lambda", "1", "weight of the unlabeled objective"},
        {"mu", "0.1", "weight of the fusion regularizer"},
        {"adaption_steps", "3", "internal draws K per reference window"},
        {"margin", "2", "clamp on the external divergence"},
        {"batch_labeled", "16", "labeled batch per task"},
        {"batch_unlabeled", "24", "reference windows per task per step"},
        {"batch_eval", "32", "evaluation batch"},
        {"lr", "0.0003", "Adam learning rate"},
        {"beta1", "0.9", "Adam first-moment decay"},
        {"beta2", "0.999", "Adam second-moment decay"},
        {"eps", "1e-08", "Adam epsilon"},
        {"weight_decay", "1e-06", "decoupled weight decay"},
        {"gate_lr_scale", "1", "learning-rate multiplier for the gating logits"},
        {"tau0", "5", "initial Gumbel-Softmax temperature"},
        {"tau_min", "0.5", "temperature floor"},
        {"tau_rate", "0", "temperature decay per step; 0 reaches tau_min at 80% of max_steps"},
        {"max_steps", "2000", "training steps"},
        {"eval_interval", "100", "steps between validation passes"},
        {"patience", "5", "non-improving validation passes before stopping"},
        {"log_interval", "1", "steps between loss rows"},
        {"upsample", "true", "balance labeled classes by resampling"},
        {"seed", "1", "run seed"},
    };
    return keys;
}

KeyValues default_key_values() {
    KeyValues kv;
    for (const auto& k : config_keys()) kv[k.name] = k.default_value;
    return kv;
}

void set_config_value(KeyValues& kv, const std::string& key, const std::string& value) {
    if (!kv.contains(key) && !default_key_values().contains(key))
        throw ConfigError(key, "unknown config key '" + key + "'");
    kv[key] = value;
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues parse_config(std::string_view text, KeyValues base) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("", "config line " + std::to_string(lineno) + " is not key = value: " + line);
        set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

KeyValues read_config_file(const std::filesystem::path& path, KeyValues base) {
    std::ifstream in(path);
    if (!in) throw ArtifactError("cannot read config " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    auto kv = parse_config(s.str(), std::move(base));
    // A relative manifest path is taken relative to the config file.
    auto& m = kv["manifest"];
    if (!m.empty() && std::filesystem::path(m).is_relative() && path.has_parent_path())
        m = (path.parent_path() / m).lexically_normal().string();
    return kv;
}

std::string config_text(const KeyValues& kv) {
    std::ostringstream s;
    for (const auto& [k, v] : kv) s << k << " = " << v << '\n';
    return s.str();
}

std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::Asm: return "asm";
        case Architecture::SingleTask: return "single-task";
        case Architecture::ShareAll: return "share-all";
    }
    return "?";
}

namespace {

class Typed {
public:
    explicit Typed(const KeyValues& kv) : kv_(kv) {
        for (const auto& [k, _] : kv)
            if (!default_key_values().contains(k)) throw ConfigError(k, "unknown config key '" + k + "'");
    }

    const std::string& text(const std::string& key) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError(key, "missing config key '" + key + "'");
        return it->second;
    }
    double real(const std::string& key) const {
        try {
            return parse_double(text(key));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(key, "config key '" + key + "': " + e.what());
        }
    }
    std::size_t count(const std::string& key) const {
        long long v = 0;
        try {
            v = parse_int(text(key));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(key, "config key '" + key + "': " + e.what());
        }
        if (v < 0) throw ConfigError(key, "config key '" + key + "' must be >= 0");
        return static_cast<std::size_t>(v);
    }
    bool flag(const std::string& key) const {
        const auto& t = text(key);
        if (t == "true" || t == "1") return true;
        if (t == "false" || t == "0") return false;
        throw ConfigError(key, "config key '" + key + "' expects true or false, got '" + t + "'");
    }

private:
    const KeyValues& kv_;
};

}  // namespace

ExperimentConfig experiment_config(const KeyValues& kv) {
    const Typed k(kv);
    ExperimentConfig c;
    c.manifest = k.text("manifest");
    c.window_length = k.count("window_length");
    c.stride = k.count("stride");
    c.unlabeled_ratio = k.real("unlabeled_ratio");
    if (!(c.unlabeled_ratio >= 0.0)) throw ConfigError("unlabeled_ratio", "unlabeled_ratio must be >= 0");
    c.hidden = k.count("hidden");
    c.blocks = k.count("blocks");
    c.block_depth = k.count("block_depth");
    try {
        c.unit_mode = parse_unit_mode(k.text("unit_mode"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("unit_mode", std::string("config key 'unit_mode': ") + e.what());
    }
    c.dropout = k.real("dropout");
    const auto& arch = k.text("architecture");
    if (arch == "asm")
        c.architecture = Architecture::Asm;
    else if (arch == "single-task")
        c.architecture = Architecture::SingleTask;
    else if (arch == "share-all")
        c.architecture = Architecture::ShareAll;
    else
        throw ConfigError("architecture", "config key 'architecture': unknown value '" + arch + "'");

    auto& t = c.train;
    t.lambda = k.real("lambda");
    t.mu = k.real("mu");
    t.adaption_steps = k.count("adaption_steps");
    t.fragment_length = k.count("fragment_length");
    t.margin = k.real("margin");
    t.batch_labeled = k.count("batch_labeled");
    t.batch_unlabeled = k.count("batch_unlabeled");
    t.batch_eval = k.count("batch_eval");
    t.adam.lr = k.real("lr");
    t.adam.beta1 = k.real("beta1");
    t.adam.beta2 = k.real("beta2");
    t.adam.eps = k.real("eps");
    t.adam.weight_decay = k.real("weight_decay");
    t.gate_lr_scale = k.real("gate_lr_scale");
    t.temperature.tau0 = k.real("tau0");
    t.temperature.tau_min = k.real("tau_min");
    t.temperature.rate = k.real("tau_rate");
    t.max_steps = k.count("max_steps");
    t.eval_interval = k.count("eval_interval");
    t.patience = k.count("patience");
    t.log_interval = k.count("log_interval");
    t.upsample = k.flag("upsample");
    t.seed = static_cast<std::uint64_t>(k.count("seed"));
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        std::string key;
        for (const auto& ck : config_keys())
            if (msg.find(ck.name) != std::string::npos && ck.name.size() > key.size()) key = ck.name;
        throw ConfigError(key, msg);
    }
    if (c.hidden == 0) throw ConfigError("hidden", "hidden must be >= 1");
    if (c.blocks == 0) throw ConfigError("blocks", "blocks must be >= 1");
    if (c.block_depth == 0) throw ConfigError("block_depth", "block_depth must be >= 1");
    if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("dropout", "dropout must lie in [0, 1)");
    return c;
}

KeyValues to_key_values(const ExperimentConfig& c) {
    const auto& t = c.train;
    return {
        {"manifest", c.manifest},
        {"window_length", std::to_string(c.window_length)},
        {"stride", std::to_string(c.stride)},
        {"unlabeled_ratio", format_double(c.unlabeled_ratio)},
        {"fragment_length", std::to_string(t.fragment_length)},
        {"hidden", std::to_string(c.hidden)},
        {"blocks", std::to_string(c.blocks)},
        {"block_depth", std::to_string(c.block_depth)},
        {"unit_mode", to_string(c.unit_mode)},
        {"dropout", format_double(c.dropout)},
        {"architecture", to_string(c.architecture)},
        {"lambda", format_double(t.lambda)},
        {"mu", format_double(t.mu)},
        {"adaption_steps", std::to_string(t.adaption_steps)},
        {"margin", format_double(t.margin)},
        {"batch_labeled", std::to_string(t.batch_labeled)},
        {"batch_unlabeled", std::to_string(t.batch_unlabeled)},
        {"batch_eval", std::to_string(t.batch_eval)},
        {"lr", format_double(t.adam.lr)},
        {"beta1", format_double(t.adam.beta1)},
        {"beta2", format_double(t.adam.beta2)},
        {"eps", format_double(t.adam.eps)},
        {"weight_decay", format_double(t.adam.weight_decay)},
        {"gate_lr_scale", format_double(t.gate_lr_scale)},
        {"tau0", format_double(t.temperature.tau0)},
        {"tau_min", format_double(t.temperature.tau_min)},
        {"tau_rate", format_double(t.temperature.rate)},
        {"max_steps", std::to_string(t.max_steps)},
        {"eval_interval", std::to_string(t.eval_interval)},
        {"patience", std::to_string(t.patience)},
        {"log_interval", std::to_string(t.log_interval)},
        {"upsample", t.upsample ? "true" : "false"},
        {"seed", std::to_string(t.seed)},
    };
}

ModelConfig model_config_for(const ExperimentConfig& c, const WindowedDataset& data) {
    ModelConfig m;
    m.tasks = data.tasks.size();
    m.views = data.input_dims.size();
    m.input_dims = data.input_dims;
    m.classes = data.classes;
    m.hidden = c.hidden;
    m.block_depth = c.block_depth;
    m.dropout = c.dropout;
    m.unit_mode = c.unit_mode;
    switch (c.architecture) {
        case Architecture::Asm:
            m.blocks = c.blocks;
            break;
        case Architecture::ShareAll:
            m.blocks = 1;
            break;
        case Architecture::SingleTask:
            m.blocks = m.tasks * m.views;
            m.routing = Routing::Private;
            m.unit_mode = UnitMode::PerTaskView;
            break;
    }
    m.validate();
    return m;
}

}  // namespace asm2tv
