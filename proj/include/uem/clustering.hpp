#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "uem/diffkit.hpp"

namespace uem::clustering {

using diffkit::Tensor;

/// Result of one Euclidean K-Means fit. Every assignment points at its nearest
/// center (ties to the lowest center index) and wcss is the matching within-
/// cluster sum of squared distances.
struct Clustering {
  Tensor centers;  // k x d
  std::vector<std::size_t> assignments;
  double wcss = 0.0;

  std::size_t k() const { return centers.rows(); }
};

struct KMeansOptions {
  std::size_t restarts = 8;
  std::size_t max_iterations = 100;
  /// Stop once the largest center displacement falls below this.
  double tolerance = 1e-6;
};

/// Index of the nearest center by squared Euclidean distance; ties to the
/// lowest index.
std::size_t nearest_center(std::span<const double> point, const Tensor& centers);

/// Sum of squared distances from each point to its assigned center.
double wcss(const Tensor& points, const Tensor& centers, std::span<const std::size_t> assignments);

/// Lloyd iterations from k-means++ seeding, best of opts.restarts by wcss
/// (lowest restart index wins ties). Deterministic given seed.
Clustering kmeans(const Tensor& points, std::size_t k, std::uint64_t seed, const KMeansOptions& opts = {});

struct ElbowFit {
  std::size_t k = 0;
  std::size_t k_min = 0;
  std::vector<double> wcss;  // wcss[i] belongs to k_min + i
  Clustering clustering;     // best fit at the chosen k
};

/// Fits k = k_min..k_max and picks the knee: the k farthest below the chord
/// joining the two end points once both axes are rescaled to [0, 1]. Ties go
/// to the smaller k; a flat curve (all points identical) yields k_min.
ElbowFit elbow(const Tensor& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
               const KMeansOptions& opts = {});

std::size_t estimate_k_elbow(const Tensor& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                             const KMeansOptions& opts = {});

/// [2, min(20, floor(N / 10))], widened to at least [2, 3] and capped at N.
std::pair<std::size_t, std::size_t> default_k_range(std::size_t n);

}  // namespace uem::clustering
