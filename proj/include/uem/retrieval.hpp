#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uem/diffkit.hpp"
#include "uem/encoder.hpp"

namespace uem::retrieval {

using diffkit::Tensor;

enum class DistanceMetric { euclidean, cosine };

struct RankedItem {
  std::size_t id = 0;
  double distance = 0.0;
};

/// Per-query verdict: null (query judged private) or the k nearest
/// retrieval-domain items by ascending distance.
struct RetrievalOutcome {
  std::size_t query_id = 0;
  bool is_null = false;
  std::vector<RankedItem> ranked;
  /// Detector score of the query (NaN when no detector was used).
  double detector_score = 0.0;
};

/// Open-set detector: a query is private when its smallest
/// (1 - cos) * distance score to the prototypes exceeds eta.
struct Detector {
  Tensor prototypes;
  double eta = 0.0;
};

double detector_score(std::span<const double> query, const Tensor& prototypes);
bool detect_private(std::span<const double> query, const Tensor& prototypes, double eta);

/// Linear-interpolated percentile (q in [0, 100]) of a nonempty sample.
double percentile(std::vector<double> values, double q);

/// eta = q-th percentile of the retrieval instances' scores to the prototypes.
Detector calibrate_detector(const Tensor& retrieval_features, const Tensor& prototypes, double q);

/// Full ranking of the retrieval rows; ties to the lower id.
std::vector<RankedItem> rank(std::span<const double> query, const Tensor& retrieval_features,
                             DistanceMetric metric = DistanceMetric::euclidean);

/// Null when the detector flags the query; otherwise the first k ranked items.
RetrievalOutcome retrieve(std::size_t query_id, std::span<const double> query_feature,
                          const Tensor& retrieval_features, std::size_t k, const Detector* detector,
                          DistanceMetric metric = DistanceMetric::euclidean);

/// Encodes the query rows and the retrieval rows, then retrieves every query.
std::vector<RetrievalOutcome> retrieve_all(const encoder::EncoderParams& enc, const Tensor& queries,
                                           const Tensor& retrieval_rows, std::size_t k, const Detector* detector,
                                           DistanceMetric metric = DistanceMetric::euclidean);

/// Mean over relevant positions r (1-based) of (#relevant in top r) / r.
double average_precision(const std::vector<bool>& relevance);

/// mAP over queries whose label occurs among the retrieval labels. Each
/// outcome must carry the full ranking. Shared-label queries without any
/// relevant item are skipped with a warning (counted in *skipped).
double map_all(std::span<const RetrievalOutcome> outcomes, std::span<const int> query_labels,
               std::span<const int> retrieval_labels, std::size_t* skipped = nullptr);

/// Fraction of private-label queries answered with null; nullopt when there
/// are no private-label queries.
std::optional<double> openset_accuracy(std::span<const RetrievalOutcome> outcomes, std::span<const int> query_labels,
                                       std::span<const int> retrieval_labels);

struct Metrics {
  std::optional<double> map_all;
  std::optional<double> openset_accuracy;
  std::size_t num_queries = 0;
  std::size_t num_shared = 0;
  std::size_t num_private = 0;
  std::size_t num_null = 0;
  std::size_t skipped = 0;
};

struct EvalConfig {
  double percentile = 95.0;
  DistanceMetric metric = DistanceMetric::euclidean;
  /// Elbow range for the evaluation-time prototype fit; 0 picks the default.
  std::size_t k_min = 0;
  std::size_t k_max = 0;
  std::size_t restarts = 8;
  bool merge = true;
  std::uint64_t seed = 0;
};

struct Evaluation {
  Metrics metrics;
  Detector detector;
  /// Detector-on outcomes with the full ranking for non-null verdicts.
  std::vector<RetrievalOutcome> outcomes;
};

/// Builds the detector from the encoded retrieval domain (unified prototypes
/// supported by retrieval data: own and merged), scores every query, and
/// computes mAP@All on the detector-free full ranking.
Evaluation evaluate(const encoder::EncoderParams& enc, const Tensor& queries, std::span<const int> query_labels,
                    const Tensor& retrieval_rows, std::span<const int> retrieval_labels, const EvalConfig& cfg);

/// Detector built from already encoded features of both domains.
Detector build_detector(const Tensor& query_features, const Tensor& retrieval_features, const EvalConfig& cfg);

/// CSV of outcomes: query_id,is_null,detector_score,ranked_ids (space separated).
std::string outcomes_csv(std::span<const RetrievalOutcome> outcomes, std::size_t max_ids = 0);

}  // namespace uem::retrieval
