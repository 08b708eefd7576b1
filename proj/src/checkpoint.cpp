#include "asm2tv/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "asm2tv/data.hpp"

namespace asm2tv {

namespace {

constexpr char kMagic[8] = {'A', 'S', 'M', '2', 'T', 'V', 'C', '1'};

class Writer {
public:
    explicit Writer(std::ofstream& out) : out_(out) {}
    void u64(std::uint64_t x) { out_.write(reinterpret_cast<const char*>(&x), sizeof x); }
    void f64(double x) { out_.write(reinterpret_cast<const char*>(&x), sizeof x); }
    void str(const std::string& s) {
        u64(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void doubles(std::span<const double> xs) {
        u64(xs.size());
        out_.write(reinterpret_cast<const char*>(xs.data()), static_cast<std::streamsize>(xs.size() * sizeof(double)));
    }
    void kv(const std::map<std::string, std::string>& m) {
        u64(m.size());
        for (const auto& [k, v] : m) {
            str(k);
            str(v);
        }
    }

private:
    std::ofstream& out_;
};

class Reader {
public:
    Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
    void raw(char* dst, std::size_t n) {
        if (!in_.read(dst, static_cast<std::streamsize>(n))) throw ArtifactError("truncated checkpoint " + path_);
    }
    std::uint64_t u64() {
        std::uint64_t x;
        raw(reinterpret_cast<char*>(&x), sizeof x);
        return x;
    }
    double f64() {
        double x;
        raw(reinterpret_cast<char*>(&x), sizeof x);
        return x;
    }
    std::size_t count() {
        const auto n = u64();
        if (n > (std::uint64_t{1} << 32)) throw ArtifactError("corrupt length in checkpoint " + path_);
        return static_cast<std::size_t>(n);
    }
    std::string str() {
        std::string s(count(), '\0');
        raw(s.data(), s.size());
        return s;
    }
    std::vector<double> doubles() {
        std::vector<double> xs(count());
        raw(reinterpret_cast<char*>(xs.data()), xs.size() * sizeof(double));
        return xs;
    }
    std::map<std::string, std::string> kv() {
        std::map<std::string, std::string> m;
        const auto n = count();
        for (std::size_t i = 0; i < n; ++i) {
            auto k = str();
            m[k] = str();
        }
        return m;
    }

private:
    std::ifstream& in_;
    std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const AsmModel& model, const AdamState* optimizer,
                     const std::map<std::string, std::string>& experiment, std::size_t step) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArtifactError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    Writer w(out);
    w.kv(experiment);
    w.kv(to_key_values(model.config()));
    w.u64(model.seed());
    w.u64(step);
    w.u64(model.parameters().size());
    for (const auto& p : model.parameters()) {
        w.str(p.name);
        w.u64(p.tensor.shape().size());
        for (auto d : p.tensor.shape()) w.u64(d);
        w.doubles(p.tensor.data());
    }
    w.u64(optimizer ? 1 : 0);
    if (optimizer) {
        const auto& o = optimizer->options;
        for (double x : {o.lr, o.beta1, o.beta2, o.eps, o.weight_decay}) w.f64(x);
        w.u64(optimizer->step);
        w.u64(optimizer->m.size());
        for (std::size_t i = 0; i < optimizer->m.size(); ++i) {
            w.doubles(optimizer->m[i]);
            w.doubles(optimizer->v[i]);
        }
    }
    if (!out) throw ArtifactError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot open checkpoint " + path.string());
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ArtifactError(path.string() + " is not a checkpoint");
    Reader r(in, path.string());
    Checkpoint c;
    c.experiment = r.kv();
    try {
        c.model_config = model_config_from_key_values(r.kv());
    } catch (const std::invalid_argument& e) {
        throw ArtifactError("checkpoint " + path.string() + " has a bad model config: " + e.what());
    }
    c.model_seed = r.u64();
    c.step = r.count();
    const auto n = r.count();
    for (std::size_t i = 0; i < n; ++i) {
        StoredTensor t;
        t.name = r.str();
        const auto dims = r.count();
        for (std::size_t d = 0; d < dims; ++d) t.shape.push_back(r.count());
        t.values = r.doubles();
        if (t.values.size() != shape_numel(t.shape)) throw ArtifactError("tensor " + t.name + " has a bad size");
        c.parameters.push_back(std::move(t));
    }
    c.has_optimizer = r.u64() != 0;
    if (c.has_optimizer) {
        auto& o = c.optimizer.options;
        o.lr = r.f64();
        o.beta1 = r.f64();
        o.beta2 = r.f64();
        o.eps = r.f64();
        o.weight_decay = r.f64();
        c.optimizer.step = r.u64();
        const auto m = r.count();
        for (std::size_t i = 0; i < m; ++i) {
            c.optimizer.m.push_back(r.doubles());
            c.optimizer.v.push_back(r.doubles());
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw ArtifactError("trailing bytes in checkpoint " + path.string());
    return c;
}

void restore_parameters(AsmModel& model, const Checkpoint& c) {
    const auto& params = model.parameters();
    if (params.size() != c.parameters.size())
        throw ArtifactError("checkpoint holds " + std::to_string(c.parameters.size()) + " tensors, model has " +
                            std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& s = c.parameters[i];
        if (s.name != params[i].name || s.shape != params[i].tensor.shape())
            throw ArtifactError("checkpoint tensor " + s.name + " " + shape_str(s.shape) + " does not match " +
                                params[i].name + " " + shape_str(params[i].tensor.shape()));
        Tensor dst = params[i].tensor;
        std::copy(s.values.begin(), s.values.end(), dst.mutable_data().begin());
    }
}

AsmModel model_from_checkpoint(const Checkpoint& c) {
    AsmModel model(c.model_config, c.model_seed);
    restore_parameters(model, c);
    return model;
}

}  // namespace asm2tv
