#include "asm2tv/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace asm2tv {

double dtw_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw of an empty series");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(b.size() + 1, inf), cur(b.size() + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::abs(a[i - 1] - b[j - 1]) + std::min({prev[j], cur[j - 1], prev[j - 1]});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<double> channel_mean_series(std::span<const double> rows, std::size_t channels, bool z_normalize) {
    if (channels == 0 || rows.size() % channels != 0) throw std::invalid_argument("buffer is not rows x channels");
    const std::size_t n = rows.size() / channels;
    std::vector<double> out(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < channels; ++c) out[r] += rows[r * channels + c];
        out[r] /= static_cast<double>(channels);
    }
    if (z_normalize && n > 0) {
        double mu = 0.0;
        for (double x : out) mu += x;
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (double x : out) var += (x - mu) * (x - mu);
        const double sd = std::sqrt(var / static_cast<double>(n));
        for (double& x : out) x = sd > 0.0 ? (x - mu) / sd : 0.0;
    }
    return out;
}

std::vector<std::vector<double>> dtw_matrix(const std::vector<std::vector<double>>& series) {
    const std::size_t n = series.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = dtw_distance(series[i], series[j]);
    return d;
}

namespace {

double comb2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw std::invalid_argument("partitions differ in size");
    if (a.empty()) throw std::invalid_argument("ARI of empty partitions");
    std::map<std::pair<std::size_t, std::size_t>, double> joint;
    std::map<std::size_t, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [_, n] : joint) index += comb2(n);
    for (const auto& [_, n] : rows) sum_a += comb2(n);
    for (const auto& [_, n] : cols) sum_b += comb2(n);
    const double expected = sum_a * sum_b / comb2(static_cast<double>(a.size()));
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return rows.size() == joint.size() && cols.size() == joint.size() ? 1.0 : 0.0;
    return (index - expected) / (max_index - expected);
}

std::vector<std::size_t> view_assignment(const GatingPolicy& gating) {
    const auto hard = gating.hard_assignment();
    std::vector<std::size_t> out(gating.views());
    for (std::size_t v = 0; v < gating.views(); ++v) {
        if (gating.unit_mode() == UnitMode::PerView) {
            out[v] = hard[v];
            continue;
        }
        std::vector<std::size_t> votes(gating.blocks(), 0);
        for (std::size_t t = 0; t < gating.tasks(); ++t) ++votes[hard[gating.unit_index(t, v)]];
        out[v] = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return out;
}

double gate_cluster_score(const GatingPolicy& gating, std::span<const std::size_t> planted) {
    if (planted.size() != gating.views())
        throw std::invalid_argument("planted groups cover " + std::to_string(planted.size()) + " views, gating has " +
                                    std::to_string(gating.views()));
    const auto assigned = view_assignment(gating);
    return adjusted_rand_index(assigned, planted);
}

}  // namespace asm2tv
