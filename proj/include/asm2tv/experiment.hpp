#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "asm2tv/config.hpp"
#include "asm2tv/data.hpp"
#include "asm2tv/metrics.hpp"
#include "asm2tv/trainer.hpp"

namespace asm2tv {

/// Ingests the manifest and cuts windows at the configured length and stride.
WindowedDataset load_dataset(const ExperimentConfig& config);

/// Copy of `data` with the unlabeled split cut down to the configured ratio
/// (unchanged when the ratio is 0). The fragment choice is seeded by `seed`.
WindowedDataset apply_unlabeled_ratio(const WindowedDataset& data, const ExperimentConfig& config, std::uint64_t seed);

struct ExperimentResult {
    RunRecord record;
    TaskMetrics test;
};

/// Builds the configured architecture, fits it and scores the best
/// parameters on the test split. Model init uses a stream of the run seed.
ExperimentResult run_experiment(const ExperimentConfig& config, const WindowedDataset& data,
                                const std::filesystem::path& run_dir = {},
                                const std::vector<std::string>& task_names = {});

std::uint64_t model_seed(std::uint64_t run_seed);

enum class AblationAxis { Blocks, Ratio, Gca };
std::string to_string(AblationAxis axis);
AblationAxis parse_ablation_axis(const std::string& text);

/// One axis varies, everything else stays at `base`. Gca values are 0 (off,
/// lambda 0) or 1 (on, the base lambda).
struct AblationGrid {
    AblationAxis axis = AblationAxis::Blocks;
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;
    ExperimentConfig base;
};

struct AblationRow {
    std::string axis;
    double value = 0.0;
    std::size_t seed_count = 0;
    Metrics mean;
    Metrics std;  ///< sample standard deviation over seeds, 0 for a single seed
};

inline constexpr const char* kAblationCsvHeader =
    "axis,value,seed_count,acc_mean,acc_std,macro_f1_mean,macro_f1_std,weighted_f1_mean,weighted_f1_std";

/// Test metrics of one model per (grid point, seed); `data` holds the full
/// unlabeled split.
std::vector<AblationRow> run_ablation(const AblationGrid& grid, const WindowedDataset& data,
                                      std::ostream* progress = nullptr);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace asm2tv
