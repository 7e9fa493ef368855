#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uem/diffkit.hpp"
#include "uem/domain.hpp"

namespace uem::protostruct {

using Point = std::vector<double>;

/// Cluster centers of one domain (pre-merge ids are positions in `points`).
struct PrototypeSet {
  std::vector<Point> points;
  Domain domain = Domain::a;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  static PrototypeSet from_tensor(const diffkit::Tensor& centers, Domain domain);
};

enum class Provenance { own, translated, merged };
std::string_view to_string(Provenance p);

/// Prototype structure of one (destination) domain after bringing in the other
/// domain's translated prototypes. Order: destination prototypes in their
/// original order (merged ones replaced by the pair mean), then the unmerged
/// translated prototypes in their original order.
struct UnifiedStructure {
  Domain domain = Domain::a;
  std::vector<Point> prototypes;
  std::vector<Provenance> provenance;
  /// Destination-domain pre-merge id -> unified id.
  std::vector<std::size_t> own_to_unified;
  /// Other-domain pre-merge id -> unified id.
  std::vector<std::size_t> other_to_unified;
  /// Accepted (destination id, translated id) pairs, in acceptance order.
  std::vector<std::pair<std::size_t, std::size_t>> merged_pairs;
  /// Merge threshold used (min of the two sets' minimum pairwise distances).
  double threshold = 0.0;

  std::size_t size() const { return prototypes.size(); }
  /// Unified id of a pre-merge prototype of `source`; throws ContractError for
  /// a missing entry (stale structure).
  std::size_t unified_id(Domain source, std::size_t pre_merge_id) const;
  diffkit::Tensor to_tensor() const;
};

/// Shift every prototype by (mean_dst - mean_src).
PrototypeSet translate(const PrototypeSet& src, std::span<const double> mean_src, std::span<const double> mean_dst,
                       Domain dst);

/// Smallest Euclidean distance between distinct prototypes; +inf below two.
double min_pairwise_distance(std::span<const Point> prototypes);

/// One merging pass. Each translated prototype proposes its nearest destination
/// prototype; proposals are accepted in ascending distance order while the
/// distance is strictly below the threshold and neither endpoint is taken.
/// With merge == false the structure is the plain union.
UnifiedStructure build_unified(const PrototypeSet& own, const PrototypeSet& translated, bool merge = true);

/// CSV dump: unified_id,provenance,own_id,other_id,p0..p{d-1}.
std::string structure_csv(const UnifiedStructure& s);

}  // namespace uem::protostruct
