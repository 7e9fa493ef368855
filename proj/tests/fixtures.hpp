#pragma once

#include <vector>

#include "oracles.hpp"
#include "uem/diffkit.hpp"
#include "uem/rng.hpp"

namespace uem::test {

inline diffkit::Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  diffkit::Tensor t(diffkit::Shape{rows, cols});
  for (double& x : t.data()) x = scale * rng.normal();
  return t;
}

inline diffkit::Tensor random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  diffkit::Tensor t(diffkit::Shape{n});
  for (double& x : t.data()) x = scale * rng.normal();
  return t;
}

inline oracle::Mat to_mat(const diffkit::Tensor& t) {
  oracle::Mat m(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) m[i].assign(t.row(i).begin(), t.row(i).end());
  return m;
}

inline diffkit::Tensor from_mat(const oracle::Mat& m) {
  diffkit::Tensor t(diffkit::Shape{m.size(), m.empty() ? 0 : m[0].size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t k = 0; k < m[i].size(); ++k) t.at(i, k) = m[i][k];
  return t;
}

inline std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

}  // namespace uem::test
