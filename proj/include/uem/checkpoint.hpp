#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "uem/trainer.hpp"

namespace uem::checkpoint {

/// Serialized training state plus the flat run configuration. Key order and
/// number formatting are fixed, so equal states give equal bytes.
std::string serialize(const trainer::TrainState& state, const nlohmann::ordered_json& run_config);

struct Loaded {
  trainer::TrainState state;  // state.config is left at defaults
  nlohmann::json run_config;
};

Loaded deserialize(std::string_view text, const std::string& source);

void save(const std::filesystem::path& path, const trainer::TrainState& state,
          const nlohmann::ordered_json& run_config);
Loaded load(const std::filesystem::path& path);

}  // namespace uem::checkpoint
