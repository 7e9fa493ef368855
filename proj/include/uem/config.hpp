#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uem/datagen.hpp"
#include "uem/retrieval.hpp"
#include "uem/trainer.hpp"

namespace uem::config {

/// Everything a run needs. One root seed feeds every component through named
/// sub-streams.
struct RunConfig {
  std::uint64_t seed = 2024;
  datagen::ScenarioConfig data;
  trainer::TrainConfig train;
  retrieval::EvalConfig eval;

  /// Copies the root seed into the component configs and validates them.
  void finalize();
};

struct KeyDoc {
  std::string key;
  std::string help;
};

/// Every documented flat key, in the fixed order used by to_json.
const std::vector<KeyDoc>& documented_keys();

/// Assigns one flat key from its text form. Unknown keys and bad values throw
/// ConfigError naming the key.
void set(RunConfig& cfg, std::string_view key, std::string_view value);

/// Applies a JSON object. Nested objects are flattened with dots, so
/// {"stage1": {"epochs": 3}} and {"stage1.epochs": 3} are equivalent.
void apply_json(RunConfig& cfg, const nlohmann::json& j);

/// Parses "key=value".
void apply_override(RunConfig& cfg, std::string_view assignment);

void load_file(RunConfig& cfg, const std::filesystem::path& path);

/// Flat key -> value, keys in documented order.
nlohmann::ordered_json to_json(const RunConfig& cfg);

/// Round trip of to_json.
RunConfig from_json(const nlohmann::json& j);

}  // namespace uem::config
