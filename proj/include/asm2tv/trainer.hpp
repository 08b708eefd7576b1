#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "asm2tv/data.hpp"
#include "asm2tv/gca_sampler.hpp"
#include "asm2tv/losses.hpp"
#include "asm2tv/metrics.hpp"
#include "asm2tv/model.hpp"
#include "asm2tv/optim.hpp"

namespace asm2tv {

struct TemperatureSchedule {
    double tau0 = 5.0;
    double tau_min = 0.5;
    double rate = 0.0;  ///< per-step decay; 0 picks a rate reaching tau_min at 80% of training
};

double temperature_at(std::size_t step, const TemperatureSchedule& schedule);

struct TrainConfig {
    double lambda = 1.0;
    double mu = 0.1;
    std::size_t adaption_steps = 3;
    std::size_t fragment_length = 12;  ///< windows per unlabeled fragment
    double margin = 2.0;
    std::size_t batch_labeled = 16;
    std::size_t batch_unlabeled = 24;
    std::size_t batch_eval = 32;
    AdamOptions adam;
    double gate_lr_scale = 1.0;  ///< learning-rate multiplier for the gating logits
    TemperatureSchedule temperature;
    std::size_t max_steps = 2000;
    std::size_t eval_interval = 100;
    std::size_t patience = 5;  ///< non-improving evaluations before stopping
    std::size_t log_interval = 1;
    bool upsample = true;
    std::uint64_t seed = 1;

    void validate() const;
    /// Schedule with an automatic rate filled in from max_steps.
    TemperatureSchedule resolved_schedule() const;
};

/// Independent random streams of one run, all derived from the run seed.
struct RunStreams {
    Rng data;
    Rng gca;
    Rng gumbel;
    Rng dropout_labeled;
    Rng dropout_unlabeled;

    explicit RunStreams(std::uint64_t seed);
};

/// One mini-batch per task: views[t][v] is (B_t, dim_v).
struct LabeledBatch {
    std::vector<std::vector<Tensor>> views;
    std::vector<std::vector<int>> labels;
};

/// Window tensors of one GCA draw batch per task.
struct GcaInputs {
    std::vector<std::vector<Tensor>> reference;                  ///< [t][v]
    std::vector<std::vector<std::vector<Tensor>>> internal;      ///< [t][k][v]
    std::vector<std::array<std::vector<Tensor>, 2>> external;    ///< [t][i][v]
};

LabeledBatch gather_labeled(const WindowedDataset& data, const std::vector<std::vector<std::size_t>>& indices);
GcaInputs gather_gca(const FragmentStore& store, const std::vector<GcaSample>& draws);

/// Values seen inside one step, for recomputing the objective elsewhere.
struct StepTrace {
    std::vector<TaskOutput> labeled;
    std::vector<GcaTaskDistributions> gca;  ///< empty when the GCA term was skipped
    std::vector<double> alpha;
    std::vector<double> beta;
    double objective = 0.0;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, LossBreakdown breakdown)
        : std::runtime_error(what), breakdown_(breakdown) {}
    const LossBreakdown& breakdown() const { return breakdown_; }

private:
    LossBreakdown breakdown_;
};

/// One Adam update on the composed objective. `gca` may be null; the
/// unlabeled term is skipped when it is null or lambda is 0.
LossBreakdown train_step(AsmModel& model, Adam& optimizer, const LabeledBatch& batch, const GcaInputs* gca,
                         const TrainConfig& config, std::size_t step, RunStreams& streams, StepTrace* trace = nullptr);

struct TaskMetrics {
    std::vector<Metrics> tasks;
    Metrics mean;
};

/// Eval-mode (hard-gated, dropout-free) metrics on one split.
TaskMetrics evaluate(const AsmModel& model, const WindowedDataset& data, Split split, std::size_t batch_size);

struct MetricRow {
    std::size_t step = 0;
    std::string task;  ///< task id or "mean"
    Metrics values;
};

inline constexpr const char* kMetricsCsvHeader = "step,task,acc,macro_f1,weighted_f1";

struct RunRecord {
    std::uint64_t seed = 0;
    std::vector<LossBreakdown> losses;
    std::vector<MetricRow> metrics;
    std::size_t steps = 0;
    std::size_t best_step = 0;
    double best_val_macro_f1 = -1.0;
    bool early_stopped = false;
    std::string config_snapshot;
    std::filesystem::path best_checkpoint;
};

struct FitOptions {
    std::filesystem::path run_dir;                    ///< empty: keep everything in memory
    std::map<std::string, std::string> experiment;    ///< snapshot stored in run files and checkpoints
    std::vector<std::string> task_names;              ///< defaults to t0, t1, ...
};

/// Trains until max_steps or patience runs out, then restores the parameters
/// with the best mean validation macro-F1.
RunRecord fit(AsmModel& model, const WindowedDataset& data, const TrainConfig& config, const FitOptions& options = {});

}  // namespace asm2tv
