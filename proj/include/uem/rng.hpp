#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace uem {

/// Deterministic pseudo-random stream (splitmix64). Distribution helpers are
/// implemented here instead of <random> so generated data is identical across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Independent sub-stream derived from a root seed and a stream name
  /// ("data", "init", "shuffle", "kmeans", ...).
  static Rng stream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace uem
