#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string_view>

#include <nlohmann/json.hpp>
#include "eclipse/dataset.hpp"
#include "eclipse/model.hpp"
#include "eclipse/training.hpp"

namespace eclipse {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Complete run description: one seed feeds data generation, initialization, and training.
struct RunConfig {
    std::uint64_t seed = 0;
    SyntheticDatasetSpec data;
    ModelConfig model;
    TrainConfig train;
};

// Sections are strict: a key not listed here is an error, absent keys keep defaults.
nlohmann::json to_json(const SyntheticDatasetSpec& spec);
nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);
SyntheticDatasetSpec dataset_spec_from_json(const nlohmann::json& j);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);

/// Independent stream seeds derived from the single run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

/// Dataset spec and model config made consistent with each other (frames, geometry, vocab).
void check_consistent(const RunConfig& cfg);

}  // namespace eclipse
