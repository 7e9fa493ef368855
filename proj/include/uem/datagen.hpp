#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uem/diffkit.hpp"

namespace uem::datagen {

using diffkit::Tensor;

enum class Setting { closet, partial, openset };

std::string_view to_string(Setting s);
Setting parse_setting(std::string_view s);

/// Affine map taking domain-A class means to domain-B class means.
struct ShiftSpec {
  double rotation_deg = 30.0;
  double scale_lo = 0.8;
  double scale_hi = 1.25;
  /// Norm of the translation vector; negative means separation / 2.
  double translation_norm = -1.0;
};

struct ScenarioConfig {
  std::size_t d_in = 16;
  /// Size of the larger label space (both spaces for closet).
  std::size_t classes = 6;
  /// Split evenly over a domain's classes, remainder to the lowest labels.
  std::size_t samples_per_domain = 500;
  double separation = 8.0;
  double noise = 1.0;
  ShiftSpec shift;
  Setting setting = Setting::closet;
  /// When positive, private class means sit at least this many separations
  /// away from every shared class mean.
  double private_distance = 0.0;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Unlabeled feature rows plus labels kept for evaluation only.
struct DomainDataset {
  Tensor features;
  std::optional<std::vector<int>> labels;
  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  /// Throws DataError when the label column is absent.
  const std::vector<int>& require_labels(std::string_view what) const;
};

struct LabelSpaces {
  std::vector<int> a, b;
  std::vector<int> shared;
  std::vector<int> private_a, private_b;
};

struct Scenario {
  DomainDataset a, b;
  LabelSpaces spaces;
  /// Configured class means indexed by label (rows for labels absent from a
  /// domain are still filled).
  Tensor means_a, means_b;
  std::vector<std::size_t> counts_a, counts_b;  // per label of each space, in space order
};

/// Per-class sample counts for n classes.
std::vector<std::size_t> class_counts(std::size_t samples, std::size_t n);

Scenario gen_scenario(const ScenarioConfig& cfg);

nlohmann::ordered_json config_json(const ScenarioConfig& cfg);
nlohmann::ordered_json manifest_json(const ScenarioConfig& cfg, const Scenario& s, const std::string& file_a,
                                     const std::string& file_b);

/// CSV with header f0..f{d-1}[,label]; values written in shortest round-trip form.
std::string domain_csv(const DomainDataset& ds);
void save_domain(const std::filesystem::path& path, const DomainDataset& ds);

DomainDataset parse_domain(std::string_view text, const std::string& source);
DomainDataset load_domain(const std::filesystem::path& path);

}  // namespace uem::datagen
