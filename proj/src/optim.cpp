#include "asm2tv/optim.hpp"

#include <cmath>

namespace asm2tv {

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: params and grads differ in count");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), 0.0);
            state.v.emplace_back(p.size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state tracks a different parameter set");
    for (std::size_t k = 0; k < params.size(); ++k)
        if (params[k].size() != grads[k].size() || state.m[k].size() != params[k].size())
            throw ShapeError("adam_step: shape mismatch at parameter " + std::to_string(k));
    if (!state.lr_scale.empty() && state.lr_scale.size() != params.size())
        throw ShapeError("adam_step: lr_scale has the wrong length");

    const auto& o = state.options;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k];
        auto g = grads[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        const double lr = state.lr_scale.empty() ? o.lr : o.lr * state.lr_scale[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
            v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p[i] -= lr * o.weight_decay * p[i];
            p[i] -= lr * mhat / (std::sqrt(vhat) + o.eps);
        }
    }
}

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)) {
    state_.options = options;
    for (const auto& p : params_) {
        if (!p.requires_grad()) throw std::invalid_argument("Adam: parameter does not require grad");
        state_.m.emplace_back(p.numel(), 0.0);
        state_.v.emplace_back(p.numel(), 0.0);
    }
}

void Adam::step() {
    std::vector<std::span<double>> ps;
    std::vector<std::span<const double>> gs;
    for (auto& p : params_) {
        ps.push_back(p.mutable_data());
        gs.push_back(p.grad());
    }
    adam_step(ps, gs, state_);
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace asm2tv
