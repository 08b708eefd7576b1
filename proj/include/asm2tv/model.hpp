#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "asm2tv/gating.hpp"
#include "asm2tv/losses.hpp"
#include "asm2tv/rng.hpp"
#include "asm2tv/tensor.hpp"

namespace asm2tv {

/// How (task, view) units reach the shared-block bank.
enum class Routing {
    Learned,  ///< Gumbel-Softmax gating policy over the bank.
    Private,  ///< unit u always uses block u; requires blocks == tasks * views.
};

struct ModelConfig {
    std::size_t tasks = 1;
    std::size_t views = 1;
    std::vector<std::size_t> input_dims;  ///< per view, window length x channels
    std::size_t hidden = 64;
    std::size_t blocks = 4;
    std::size_t block_depth = 2;
    std::vector<std::size_t> classes;  ///< per task
    double dropout = 0.5;
    UnitMode unit_mode = UnitMode::PerTaskView;
    Routing routing = Routing::Learned;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Flat key=value form used inside checkpoints and config snapshots.
std::map<std::string, std::string> to_key_values(const ModelConfig& config);
ModelConfig model_config_from_key_values(const std::map<std::string, std::string>& kv);

enum class Mode { Train, Eval };

struct Linear {
    Tensor weight;  ///< (in, out)
    Tensor bias;    ///< (out)

    Tensor forward(const Tensor& x) const { return add(matmul(x, weight), bias); }
};

struct TaskOutput {
    std::vector<Tensor> view_logits;  ///< per view, (B, C_t)
    Tensor fusion_logits;             ///< (B, C_t)
};

/// Per-unit gate vectors for one mini-batch; each tensor is (1, N) on the simplex.
using GateSet = std::vector<Tensor>;

/// Per-(task, view) encoders feed a gated bank of shared blocks; each
/// (task, view) has a view head and each task a fusion head over the
/// concatenated gated view representations.
class AsmModel {
public:
    AsmModel(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    std::uint64_t seed() const { return seed_; }

    struct NamedParam {
        std::string name;
        Tensor tensor;
    };
    /// Every trainable tensor, in registration order.
    const std::vector<NamedParam>& parameters() const { return params_; }
    std::vector<Tensor> parameter_tensors() const;
    std::size_t parameter_count() const;

    bool has_gating() const { return gating_ != nullptr; }
    GatingPolicy& gating();
    const GatingPolicy& gating() const;
    UncertaintyParams& uncertainty() { return uncertainty_; }
    const UncertaintyParams& uncertainty() const { return uncertainty_; }

    /// Soft gates from one noise draw per gating unit.
    GateSet soft_gates(const std::vector<GumbelDraw>& noise) const;
    /// Noise-free hard block per (task, view), row-major by task.
    std::vector<std::size_t> routing_table() const;

    /// Forward one task. In Train mode `gates` must hold one vector per
    /// gating unit (ignored for private routing) and dropout draws from
    /// `dropout_rng`; Eval mode routes each unit to its hard block and is
    /// deterministic.
    TaskOutput forward_task(std::size_t task, const std::vector<Tensor>& views, Mode mode, const GateSet* gates,
                            Rng* dropout_rng) const;

    /// Softmax of the fusion logits in Eval mode.
    Tensor predict(std::size_t task, const std::vector<Tensor>& views) const;

    /// Gated mixture for one unit given its encoded input; exposed for tests.
    Tensor mix_blocks(const Tensor& encoded, const Tensor& gate, Mode mode, Rng* dropout_rng) const;
    Tensor run_block(std::size_t block, const Tensor& encoded, Mode mode, Rng* dropout_rng) const;
    Tensor encode(std::size_t task, std::size_t view, const Tensor& x, Mode mode, Rng* dropout_rng) const;

    const Linear& encoder(std::size_t task, std::size_t view) const;
    const std::vector<Linear>& block_layers(std::size_t block) const { return blocks_.at(block); }
    const Linear& view_head(std::size_t task, std::size_t view) const;
    const Linear& fusion_head(std::size_t task) const { return fusion_.at(task); }

    /// Copies parameter values (not graph state) from a model of identical config.
    void copy_parameters_from(const AsmModel& other);

private:
    std::size_t unit_block(std::size_t task, std::size_t view) const;
    Linear make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
    Tensor register_param(std::string name, Tensor t);

    ModelConfig config_;
    std::uint64_t seed_;
    std::vector<Linear> encoders_;             // task * V + view
    std::vector<std::vector<Linear>> blocks_;  // block -> layers
    std::vector<Linear> heads_;                // task * V + view
    std::vector<Linear> fusion_;               // task
    std::unique_ptr<GatingPolicy> gating_;
    UncertaintyParams uncertainty_;
    std::vector<NamedParam> params_;
};

struct ParamCounts {
    std::size_t total = 0;      ///< every registered tensor, gating and uncertainty included
    std::size_t network = 0;    ///< total minus the gating logits
    std::size_t unshared = 0;   ///< same network with one private block per (task, view)
    std::vector<std::size_t> single_task;  ///< the unshared budget split per task
    double reduction = 0.0;     ///< 1 - network / unshared
};

/// Closed-form parameter totals for a config.
ParamCounts param_count(const ModelConfig& config);

enum class BaselineKind { SingleTask, ShareAll };

/// single-task: one private block per (task, view), no cross-task tensors.
/// share-all: a single shared block for every unit.
AsmModel build_baseline(BaselineKind kind, ModelConfig config, std::uint64_t seed);

}  // namespace asm2tv
