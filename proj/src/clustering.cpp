#include "uem/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "uem/error.hpp"
#include "uem/rng.hpp"

namespace uem::clustering {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Tensor seed_plus_plus(const Tensor& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows(), d = points.cols();
  Tensor centers(diffkit::Shape{k, d});
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(points.row(pick).begin(), d, centers.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], squared_distance(points.row(i), centers.row(c)));
      total += best[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      pick = rng.index(n);
      continue;
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += best[i];
      if (acc > target && best[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }
  return centers;
}

void assign(const Tensor& points, const Tensor& centers, std::vector<std::size_t>& out) {
  out.resize(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) out[i] = nearest_center(points.row(i), centers);
}

Clustering lloyd(const Tensor& points, std::size_t k, Rng& rng, const KMeansOptions& opts) {
  const std::size_t n = points.rows(), d = points.cols();
  Tensor centers = seed_plus_plus(points, k, rng);
  std::vector<std::size_t> assignments;

  for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
    assign(points, centers, assignments);

    Tensor next(diffkit::Shape{k, d});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = next.row(assignments[i]);
      auto src = points.row(i);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      ++counts[assignments[i]];
    }

    // Empty clusters restart at the point farthest from its current center.
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (double& x : next.row(c)) x /= static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const double dd = squared_distance(points.row(i), centers.row(assignments[i]));
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      taken[far] = true;
      std::copy_n(points.row(far).begin(), d, next.row(c).begin());
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(squared_distance(next.row(c), centers.row(c))));
    centers = std::move(next);
    if (shift < opts.tolerance) break;
  }

  assign(points, centers, assignments);
  const double total = wcss(points, centers, assignments);
  return Clustering{std::move(centers), std::move(assignments), total};
}

}  // namespace

std::size_t nearest_center(std::span<const double> point, const Tensor& centers) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double dd = squared_distance(point, centers.row(c));
    if (dd < best_d) {
      best_d = dd;
      best = c;
    }
  }
  return best;
}

double wcss(const Tensor& points, const Tensor& centers, std::span<const std::size_t> assignments) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) total += squared_distance(points.row(i), centers.row(assignments[i]));
  return total;
}

Clustering kmeans(const Tensor& points, std::size_t k, std::uint64_t seed, const KMeansOptions& opts) {
  if (points.rank() != 2) throw ShapeError("kmeans: points must be a matrix");
  if (k < 1 || k > points.rows()) {
    throw ContractError("kmeans: k=" + std::to_string(k) + " outside [1, " + std::to_string(points.rows()) + "]");
  }
  const std::size_t restarts = std::max<std::size_t>(1, opts.restarts);
  Clustering best;
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng = Rng::stream(seed, "kmeans-restart-" + std::to_string(r));
    Clustering fit = lloyd(points, k, rng, opts);
    if (r == 0 || fit.wcss < best.wcss) best = std::move(fit);
  }
  return best;
}

ElbowFit elbow(const Tensor& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
               const KMeansOptions& opts) {
  if (k_min < 2 || k_min >= k_max || k_max > points.rows()) {
    throw ContractError("elbow: invalid k range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                        "] for " + std::to_string(points.rows()) + " points");
  }
  ElbowFit out;
  out.k_min = k_min;
  std::vector<Clustering> fits;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    fits.push_back(kmeans(points, k, seed + k, opts));
    out.wcss.push_back(fits.back().wcss);
  }

  const double top = out.wcss.front(), bottom = out.wcss.back();
  const double span = top - bottom;
  std::size_t chosen = 0;
  if (span > 1e-12 * std::max(1.0, std::abs(top))) {
    const double width = static_cast<double>(k_max - k_min);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < out.wcss.size(); ++i) {
      const double x = static_cast<double>(i) / width;
      const double y = (out.wcss[i] - bottom) / span;
      // Signed distance below the chord from (0, 1) to (1, 0).
      const double dist = (1.0 - x - y) / std::sqrt(2.0);
      if (dist > best) {
        best = dist;
        chosen = i;
      }
    }
  }
  out.k = k_min + chosen;
  out.clustering = std::move(fits[chosen]);
  return out;
}

std::size_t estimate_k_elbow(const Tensor& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                             const KMeansOptions& opts) {
  return elbow(points, k_min, k_max, seed, opts).k;
}

std::pair<std::size_t, std::size_t> default_k_range(std::size_t n) {
  std::size_t hi = std::min<std::size_t>(20, n / 10);
  hi = std::max<std::size_t>(hi, 3);
  hi = std::min(hi, n);
  return {std::min<std::size_t>(2, hi), hi};
}

}  // namespace uem::clustering
