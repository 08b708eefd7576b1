#pragma once

#include <span>
#include <vector>

#include "asm2tv/gating.hpp"

namespace asm2tv {

/// Unconstrained DTW with |a_i - b_j| local cost.
double dtw_distance(std::span<const double> a, std::span<const double> b);

/// Mean over channels of a rows x channels buffer, optionally z-normalized
/// (a constant series normalizes to zeros).
std::vector<double> channel_mean_series(std::span<const double> rows, std::size_t channels, bool z_normalize = true);

/// Pairwise DTW between per-view summary series.
std::vector<std::vector<double>> dtw_matrix(const std::vector<std::vector<double>>& series);

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// Block per view: the hard assignment for per-view gating, or the majority
/// block over tasks (ties to the lower block) for per-(task, view) gating.
std::vector<std::size_t> view_assignment(const GatingPolicy& gating);

/// ARI between the per-view block assignment and the planted view groups.
double gate_cluster_score(const GatingPolicy& gating, std::span<const std::size_t> planted);

}  // namespace asm2tv
