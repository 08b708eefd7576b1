#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "asm2tv/rng.hpp"
#include "asm2tv/tensor.hpp"

namespace asm2tv {

/// Granularity of the routing table: one row per (task, view) pair, or one
/// row per view shared by every task.
enum class UnitMode { PerTaskView, PerView };

enum class GateMode { SoftTrain, HardEval };

std::string to_string(UnitMode mode);
UnitMode parse_unit_mode(const std::string& text);

struct GumbelDraw {
    std::vector<double> values;
    std::uint64_t seed = 0;
};

/// -log(-log u) with u clamped to [1e-12, 1 - 1e-12].
double gumbel_from_uniform(double u);

GumbelDraw sample_gumbel(std::size_t n, std::uint64_t seed);
GumbelDraw sample_gumbel(std::size_t n, Rng& rng);

/// Learnable open-gate logits over N shared blocks, relaxed with
/// Gumbel-Softmax during training and hardened to argmax at inference.
class GatingPolicy {
public:
    GatingPolicy(std::size_t tasks, std::size_t views, std::size_t blocks, UnitMode unit_mode,
                 double temperature = 5.0);

    std::size_t tasks() const { return tasks_; }
    std::size_t views() const { return views_; }
    std::size_t blocks() const { return blocks_; }
    std::size_t unit_count() const { return unit_mode_ == UnitMode::PerTaskView ? tasks_ * views_ : views_; }
    UnitMode unit_mode() const { return unit_mode_; }
    std::size_t unit_index(std::size_t task, std::size_t view) const;
    /// `t{task}_v{view}` or `v{view}`.
    std::string unit_label(std::size_t unit) const;

    Tensor& logits() { return logits_; }
    const Tensor& logits() const { return logits_; }

    double temperature() const { return temperature_; }
    void set_temperature(double tau);

    GateMode mode() const { return mode_; }
    void set_mode(GateMode mode) { mode_ = mode; }

    /// Relaxed one-hot z for a unit, shape (1, N), differentiable in the logits.
    Tensor gate_weights(std::size_t unit, const GumbelDraw& draw) const;

    /// Argmax of each logits row, ties to the lowest index.
    std::vector<std::size_t> hard_assignment() const;

    /// Row-wise softmax of the logits.
    std::vector<std::vector<double>> gate_matrix() const;

    void write_gate_csv(std::ostream& out) const;

    /// One fresh noise vector per gating unit.
    std::vector<GumbelDraw> draw_noise(Rng& rng) const;

private:
    std::size_t tasks_;
    std::size_t views_;
    std::size_t blocks_;
    UnitMode unit_mode_;
    double temperature_;
    GateMode mode_ = GateMode::SoftTrain;
    Tensor logits_;
};

}  // namespace asm2tv
