#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "asm2tv/model.hpp"
#include "asm2tv/optim.hpp"

namespace asm2tv {

struct StoredTensor {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

/// Binary snapshot: magic, experiment key-values, model config, named
/// parameters as raw doubles, optimizer state.
struct Checkpoint {
    std::map<std::string, std::string> experiment;
    ModelConfig model_config;
    std::uint64_t model_seed = 0;
    std::size_t step = 0;
    std::vector<StoredTensor> parameters;
    bool has_optimizer = false;
    AdamState optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const AsmModel& model, const AdamState* optimizer,
                     const std::map<std::string, std::string>& experiment, std::size_t step);

/// Throws ArtifactError on a missing, truncated or foreign file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `model`; names and shapes must match exactly.
void restore_parameters(AsmModel& model, const Checkpoint& checkpoint);

AsmModel model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace asm2tv
