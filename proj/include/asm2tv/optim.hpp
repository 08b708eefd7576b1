#pragma once

#include <cstdint>
#include <vector>

#include "asm2tv/tensor.hpp"

namespace asm2tv {

struct AdamOptions {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Decoupled: each step subtracts lr * weight_decay * param.
    double weight_decay = 1e-6;
};

struct AdamState {
    AdamOptions options;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    /// Per-parameter learning-rate multipliers; empty means 1 everywhere.
    std::vector<double> lr_scale;
};

/// One bias-corrected Adam update of `params` using `grads`, in place.
/// Shapes of params, grads and the moment buffers must line up.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state);

/// Adam over a fixed list of graph leaves, reading their accumulated grads.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamOptions options = {});

    void step();
    void zero_grad();

    const std::vector<Tensor>& params() const { return params_; }
    AdamState& state() { return state_; }
    const AdamState& state() const { return state_; }

private:
    std::vector<Tensor> params_;
    AdamState state_;
};

}  // namespace asm2tv
