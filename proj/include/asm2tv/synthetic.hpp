#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "asm2tv/data.hpp"

namespace asm2tv {

/// Multi-task multi-view series with planted view groups. Every view in a
/// group observes its group's latent signal (two class-specific sinusoids,
/// phase-locked to window boundaries) through a per-view channel gain, plus
/// Gaussian noise. Groups use independent latents. Each task records one
/// contiguous segment per class in a seeded order; the class frequencies
/// drift slowly across a segment.
struct SyntheticSpec {
    std::size_t tasks = 4;
    std::size_t views = 6;
    std::size_t groups = 3;
    std::vector<std::size_t> view_groups;  ///< empty: contiguous equal-size groups
    std::size_t classes = 4;
    std::size_t samples_per_class = 6400;  ///< rows per class segment
    std::size_t channels = 3;
    std::size_t window_length = 32;
    double noise = 1.0;
    double drift = 0.3;           ///< relative frequency change from segment start to end
    double phase_jitter = 0.5;    ///< per-window phase jitter half-width, radians
    double task_spread = 0.1;     ///< per-task relative frequency perturbation
    double sample_rate_hz = 50.0;
    bool identity_maps = false;   ///< unit channel gains for every view
    std::uint64_t seed = 1;

    /// Group of each view after defaulting.
    std::vector<std::size_t> resolved_groups() const;
    void validate() const;
};

RawDataset generate_synthetic(const SyntheticSpec& spec);

/// Generates and writes manifest.json plus one CSV per (task, view).
void write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace asm2tv
