#include "asm2tv/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "asm2tv/format.hpp"

namespace asm2tv {

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::vector<std::size_t> split_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = parse_int(item);
        if (v < 0) throw std::invalid_argument("negative size '" + item + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

const std::string& lookup(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument("model config: missing key '" + key + "'");
    return it->second;
}

}  // namespace

void ModelConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
    if (tasks == 0) fail("tasks must be >= 1");
    if (views == 0) fail("views must be >= 1");
    if (hidden == 0) fail("hidden must be >= 1");
    if (blocks == 0) fail("blocks must be >= 1");
    if (block_depth == 0) fail("block_depth must be >= 1");
    if (input_dims.size() != views) fail("need one input dim per view");
    if (classes.size() != tasks) fail("need one class count per task");
    for (auto d : input_dims)
        if (d == 0) fail("input dims must be positive");
    for (auto c : classes)
        if (c < 2) fail("each task needs at least 2 classes");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
    if (routing == Routing::Private) {
        if (blocks != tasks * views) fail("private routing needs blocks == tasks * views");
        if (unit_mode != UnitMode::PerTaskView) fail("private routing is per task-view");
    }
}

std::map<std::string, std::string> to_key_values(const ModelConfig& c) {
    return {
        {"tasks", std::to_string(c.tasks)},
        {"views", std::to_string(c.views)},
        {"input_dims", join_sizes(c.input_dims)},
        {"hidden", std::to_string(c.hidden)},
        {"blocks", std::to_string(c.blocks)},
        {"block_depth", std::to_string(c.block_depth)},
        {"classes", join_sizes(c.classes)},
        {"dropout", format_double(c.dropout)},
        {"unit_mode", to_string(c.unit_mode)},
        {"routing", c.routing == Routing::Learned ? "learned" : "private"},
    };
}

ModelConfig model_config_from_key_values(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    c.tasks = static_cast<std::size_t>(parse_int(lookup(kv, "tasks")));
    c.views = static_cast<std::size_t>(parse_int(lookup(kv, "views")));
    c.input_dims = split_sizes(lookup(kv, "input_dims"));
    c.hidden = static_cast<std::size_t>(parse_int(lookup(kv, "hidden")));
    c.blocks = static_cast<std::size_t>(parse_int(lookup(kv, "blocks")));
    c.block_depth = static_cast<std::size_t>(parse_int(lookup(kv, "block_depth")));
    c.classes = split_sizes(lookup(kv, "classes"));
    c.dropout = parse_double(lookup(kv, "dropout"));
    c.unit_mode = parse_unit_mode(lookup(kv, "unit_mode"));
    const auto& routing = lookup(kv, "routing");
    if (routing == "learned")
        c.routing = Routing::Learned;
    else if (routing == "private")
        c.routing = Routing::Private;
    else
        throw std::invalid_argument("model config: unknown routing '" + routing + "'");
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

Tensor AsmModel::register_param(std::string name, Tensor t) {
    params_.push_back({std::move(name), t});
    return t;
}

Linear AsmModel::make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(in * out), b(out);
    for (auto& x : w) x = uniform(rng, -bound, bound);
    for (auto& x : b) x = uniform(rng, -bound, bound);
    Linear l;
    l.weight = register_param(name + ".weight", Tensor::from({in, out}, std::move(w), true));
    l.bias = register_param(name + ".bias", Tensor::from({out}, std::move(b), true));
    return l;
}

AsmModel::AsmModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
    config_.validate();
    const auto T = config_.tasks, V = config_.views, d = config_.hidden;
    Rng rng(seed);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t v = 0; v < V; ++v)
            encoders_.push_back(make_linear("encoder.t" + std::to_string(t) + ".v" + std::to_string(v) + ".layer0",
                                            config_.input_dims[v], d, rng));
    for (std::size_t i = 0; i < config_.blocks; ++i) {
        std::vector<Linear> layers;
        for (std::size_t l = 0; l < config_.block_depth; ++l)
            layers.push_back(make_linear("block." + std::to_string(i) + ".layer" + std::to_string(l), d, d, rng));
        blocks_.push_back(std::move(layers));
    }
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t v = 0; v < V; ++v)
            heads_.push_back(make_linear("head.t" + std::to_string(t) + ".v" + std::to_string(v), d,
                                         config_.classes[t], rng));
    for (std::size_t t = 0; t < T; ++t)
        fusion_.push_back(make_linear("fusion.t" + std::to_string(t), V * d, config_.classes[t], rng));
    if (config_.routing == Routing::Learned) {
        gating_ = std::make_unique<GatingPolicy>(T, V, config_.blocks, config_.unit_mode);
        register_param("gating.logits", gating_->logits());
    }
    uncertainty_ = UncertaintyParams::zeros(T);
    register_param("uncertainty.alpha", uncertainty_.alpha);
    register_param("uncertainty.beta", uncertainty_.beta);
}

std::vector<Tensor> AsmModel::parameter_tensors() const {
    std::vector<Tensor> out;
    for (const auto& p : params_) out.push_back(p.tensor);
    return out;
}

std::size_t AsmModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
}

GatingPolicy& AsmModel::gating() {
    if (!gating_) throw std::logic_error("model has private routing and no gating policy");
    return *gating_;
}

const GatingPolicy& AsmModel::gating() const {
    if (!gating_) throw std::logic_error("model has private routing and no gating policy");
    return *gating_;
}

const Linear& AsmModel::encoder(std::size_t task, std::size_t view) const {
    return encoders_.at(task * config_.views + view);
}

const Linear& AsmModel::view_head(std::size_t task, std::size_t view) const {
    return heads_.at(task * config_.views + view);
}

GateSet AsmModel::soft_gates(const std::vector<GumbelDraw>& noise) const {
    if (!gating_) return {};
    if (noise.size() != gating_->unit_count()) throw ShapeError("soft_gates: need one noise draw per gating unit");
    GateSet gates;
    for (std::size_t u = 0; u < noise.size(); ++u) gates.push_back(gating_->gate_weights(u, noise[u]));
    return gates;
}

std::size_t AsmModel::unit_block(std::size_t task, std::size_t view) const {
    if (!gating_) return task * config_.views + view;
    // Computed per call so the table always reflects the current logits.
    const auto u = gating_->unit_index(task, view);
    const auto row = gating_->logits().data().subspan(u * config_.blocks, config_.blocks);
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i)
        if (row[i] > row[best]) best = i;
    return best;
}

std::vector<std::size_t> AsmModel::routing_table() const {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < config_.tasks; ++t)
        for (std::size_t v = 0; v < config_.views; ++v) out.push_back(unit_block(t, v));
    return out;
}

Tensor AsmModel::encode(std::size_t task, std::size_t view, const Tensor& x, Mode mode, Rng* rng) const {
    const bool train = mode == Mode::Train && config_.dropout > 0.0;
    if (train && !rng) throw std::invalid_argument("forward: train mode with dropout needs an rng");
    Tensor h = relu(encoder(task, view).forward(x));
    return train ? dropout(h, 1.0 - config_.dropout, *rng, true) : h;
}

Tensor AsmModel::run_block(std::size_t block, const Tensor& h, Mode mode, Rng* rng) const {
    const bool train = mode == Mode::Train && config_.dropout > 0.0;
    if (train && !rng) throw std::invalid_argument("forward: train mode with dropout needs an rng");
    Tensor out = h;
    for (const auto& layer : blocks_.at(block)) {
        out = relu(layer.forward(out));
        if (train) out = dropout(out, 1.0 - config_.dropout, *rng, true);
    }
    return out;
}

Tensor AsmModel::mix_blocks(const Tensor& h, const Tensor& gate, Mode mode, Rng* rng) const {
    if (gate.numel() != config_.blocks) throw ShapeError("mix_blocks: gate length must equal block count");
    Tensor acc;
    for (std::size_t i = 0; i < config_.blocks; ++i) {
        Tensor term = mul_scalar(run_block(i, h, mode, rng), element(gate, i));
        acc = acc.defined() ? add(acc, term) : term;
    }
    return acc;
}

TaskOutput AsmModel::forward_task(std::size_t task, const std::vector<Tensor>& views, Mode mode,
                                  const GateSet* gates, Rng* rng) const {
    if (task >= config_.tasks) throw std::out_of_range("forward: task out of range");
    if (views.size() != config_.views)
        throw std::invalid_argument("forward: task " + std::to_string(task) + " needs " +
                                    std::to_string(config_.views) + " views, got " + std::to_string(views.size()));
    const std::size_t batch = views[0].defined() ? views[0].rows() : 0;
    for (std::size_t v = 0; v < views.size(); ++v) {
        if (!views[v].defined()) throw std::invalid_argument("forward: missing view " + std::to_string(v));
        if (views[v].dim() != 2 || views[v].cols() != config_.input_dims[v])
            throw ShapeError("forward: view " + std::to_string(v) + " has shape " + shape_str(views[v].shape()));
        if (views[v].rows() != batch) throw ShapeError("forward: batch size differs across views");
    }
    const bool soft = mode == Mode::Train && gating_ != nullptr;
    if (soft && (!gates || gates->size() != gating_->unit_count()))
        throw std::invalid_argument("forward: train mode needs one gate vector per gating unit");

    TaskOutput out;
    std::vector<Tensor> gated;
    for (std::size_t v = 0; v < config_.views; ++v) {
        const Tensor h = encode(task, v, views[v], mode, rng);
        Tensor mixed = soft ? mix_blocks(h, (*gates)[gating_->unit_index(task, v)], mode, rng)
                            : run_block(unit_block(task, v), h, mode, rng);
        out.view_logits.push_back(view_head(task, v).forward(mixed));
        gated.push_back(std::move(mixed));
    }
    out.fusion_logits = fusion_[task].forward(concat(gated));
    return out;
}

Tensor AsmModel::predict(std::size_t task, const std::vector<Tensor>& views) const {
    return softmax(forward_task(task, views, Mode::Eval, nullptr, nullptr).fusion_logits);
}

void AsmModel::copy_parameters_from(const AsmModel& other) {
    if (!(other.config_ == config_)) throw std::invalid_argument("copy_parameters_from: config mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto dst = params_[i].tensor.mutable_data();
        auto src = other.params_[i].tensor.data();
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

// ---------------------------------------------------------------------------

ParamCounts param_count(const ModelConfig& c) {
    c.validate();
    const std::size_t d = c.hidden, V = c.views, T = c.tasks;
    const std::size_t block = c.block_depth * (d * d + d);
    std::size_t base = 2 * T;  // uncertainty alpha, beta
    ParamCounts out;
    out.single_task.assign(T, 2);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t v = 0; v < V; ++v) {
            const std::size_t unit = (c.input_dims[v] * d + d) + (d * c.classes[t] + c.classes[t]);
            base += unit;
            out.single_task[t] += unit + block;
        }
        const std::size_t fusion = V * d * c.classes[t] + c.classes[t];
        base += fusion;
        out.single_task[t] += fusion;
    }
    const std::size_t gating = c.routing == Routing::Learned ? (c.unit_mode == UnitMode::PerTaskView ? T * V : V) *
                                                                   c.blocks
                                                             : 0;
    out.network = base + c.blocks * block;
    out.total = out.network + gating;
    out.unshared = base + T * V * block;
    out.reduction = 1.0 - static_cast<double>(out.network) / static_cast<double>(out.unshared);
    return out;
}

AsmModel build_baseline(BaselineKind kind, ModelConfig config, std::uint64_t seed) {
    if (kind == BaselineKind::ShareAll) {
        config.blocks = 1;
        config.routing = Routing::Learned;
    } else {
        config.blocks = config.tasks * config.views;
        config.routing = Routing::Private;
        config.unit_mode = UnitMode::PerTaskView;
    }
    return AsmModel(std::move(config), seed);
}

}  // namespace asm2tv
