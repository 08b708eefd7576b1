#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "asm2tv/data.hpp"
#include "asm2tv/model.hpp"
#include "asm2tv/trainer.hpp"

namespace asm2tv {

/// Bad or unknown configuration key; `key()` names it.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& what) : std::invalid_argument(what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct ConfigKey {
    std::string name;
    std::string default_value;
    std::string help;
};

/// Every recognised key, in documentation order.
const std::vector<ConfigKey>& config_keys();

using KeyValues = std::map<std::string, std::string>;

KeyValues default_key_values();
/// Throws ConfigError for keys outside config_keys().
void set_config_value(KeyValues& kv, const std::string& key, const std::string& value);
/// `key = value` lines; `#` starts a comment.
KeyValues parse_config(std::string_view text, KeyValues base = default_key_values());
KeyValues read_config_file(const std::filesystem::path& path, KeyValues base = default_key_values());
std::string config_text(const KeyValues& kv);

enum class Architecture { Asm, SingleTask, ShareAll };
std::string to_string(Architecture a);

struct ExperimentConfig {
    std::string manifest;
    std::size_t window_length = 0;  ///< 0: five seconds at the sample rate
    std::size_t stride = 0;         ///< 0: window length
    double unlabeled_ratio = 0.0;   ///< unlabeled windows per labeled window; 0 keeps the whole split
    std::size_t hidden = 64;
    std::size_t blocks = 4;
    std::size_t block_depth = 2;
    UnitMode unit_mode = UnitMode::PerTaskView;
    double dropout = 0.5;
    Architecture architecture = Architecture::Asm;
    TrainConfig train;
};

/// Typed view of a key-value config; ConfigError names the offending key.
ExperimentConfig experiment_config(const KeyValues& kv);
KeyValues to_key_values(const ExperimentConfig& config);

/// Model shape for a dataset: dims and class counts come from the data.
ModelConfig model_config_for(const ExperimentConfig& config, const WindowedDataset& data);

}  // namespace asm2tv
