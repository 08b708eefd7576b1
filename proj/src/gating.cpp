#include "asm2tv/gating.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "asm2tv/format.hpp"

namespace asm2tv {

std::string to_string(UnitMode mode) {
    return mode == UnitMode::PerTaskView ? "per-task-view" : "per-view";
}

UnitMode parse_unit_mode(const std::string& text) {
    if (text == "per-task-view") return UnitMode::PerTaskView;
    if (text == "per-view") return UnitMode::PerView;
    throw std::invalid_argument("unknown gating unit mode '" + text + "' (expected per-task-view or per-view)");
}

double gumbel_from_uniform(double u) {
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);
    return -std::log(-std::log(u));
}

GumbelDraw sample_gumbel(std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("sample_gumbel: n must be at least 1");
    GumbelDraw draw;
    draw.values.resize(n);
    for (auto& g : draw.values) g = gumbel_from_uniform(uniform01(rng));
    return draw;
}

GumbelDraw sample_gumbel(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    auto draw = sample_gumbel(n, rng);
    draw.seed = seed;
    return draw;
}

GatingPolicy::GatingPolicy(std::size_t tasks, std::size_t views, std::size_t blocks, UnitMode unit_mode,
                           double temperature)
    : tasks_(tasks), views_(views), blocks_(blocks), unit_mode_(unit_mode), temperature_(1.0) {
    if (tasks == 0 || views == 0 || blocks == 0) throw std::invalid_argument("GatingPolicy: empty dimension");
    set_temperature(temperature);
    logits_ = Tensor::zeros({unit_count(), blocks_}, true);
}

std::size_t GatingPolicy::unit_index(std::size_t task, std::size_t view) const {
    if (task >= tasks_ || view >= views_) throw std::out_of_range("GatingPolicy: task/view out of range");
    return unit_mode_ == UnitMode::PerTaskView ? task * views_ + view : view;
}

std::string GatingPolicy::unit_label(std::size_t unit) const {
    if (unit_mode_ == UnitMode::PerView) return "v" + std::to_string(unit);
    return "t" + std::to_string(unit / views_) + "_v" + std::to_string(unit % views_);
}

void GatingPolicy::set_temperature(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("GatingPolicy: temperature must be > 0");
    temperature_ = tau;
}

Tensor GatingPolicy::gate_weights(std::size_t unit, const GumbelDraw& draw) const {
    if (unit >= unit_count()) throw std::out_of_range("gate_weights: unit out of range");
    if (draw.values.size() != blocks_) throw ShapeError("gate_weights: noise length must equal block count");
    if (!(temperature_ > 0.0)) throw std::invalid_argument("gate_weights: temperature must be > 0");
    const Tensor row = slice_rows(logits_, unit, unit + 1);
    const Tensor noise = Tensor::from({1, blocks_}, draw.values);
    return softmax(scale(add(row, noise), 1.0 / temperature_));
}

std::vector<std::size_t> GatingPolicy::hard_assignment() const {
    std::vector<std::size_t> out(unit_count());
    for (std::size_t u = 0; u < out.size(); ++u) {
        const auto row = logits_.data().subspan(u * blocks_, blocks_);
        out[u] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

std::vector<std::vector<double>> GatingPolicy::gate_matrix() const {
    const Tensor probs = softmax(logits_.detach());
    std::vector<std::vector<double>> out(unit_count());
    for (std::size_t u = 0; u < out.size(); ++u)
        out[u].assign(probs.data().begin() + u * blocks_, probs.data().begin() + (u + 1) * blocks_);
    return out;
}

void GatingPolicy::write_gate_csv(std::ostream& out) const {
    out << "unit";
    for (std::size_t i = 0; i < blocks_; ++i) out << ",block_" << i;
    out << '\n';
    const auto probs = gate_matrix();
    for (std::size_t u = 0; u < probs.size(); ++u) {
        out << unit_label(u);
        for (double p : probs[u]) out << ',' << format_double(p);
        out << '\n';
    }
}

std::vector<GumbelDraw> GatingPolicy::draw_noise(Rng& rng) const {
    std::vector<GumbelDraw> draws;
    draws.reserve(unit_count());
    for (std::size_t u = 0; u < unit_count(); ++u) draws.push_back(sample_gumbel(blocks_, rng));
    return draws;
}

}  // namespace asm2tv
