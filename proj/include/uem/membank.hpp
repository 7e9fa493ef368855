#pragma once

#include <span>
#include <vector>

#include "uem/diffkit.hpp"
#include "uem/domain.hpp"
#include "uem/encoder.hpp"

namespace uem::membank {

/// One historical feature slot per instance; slot i always belongs to x_i.
/// Entries are raw (unnormalized) encoder outputs.
struct MemoryBank {
  diffkit::Tensor entries;  // N x d_out
  double momentum = 0.99;
  Domain domain = Domain::a;

  std::size_t size() const { return entries.rows(); }
  std::size_t dim() const { return entries.cols(); }
  std::span<const double> entry(std::size_t i) const { return entries.row(i); }
};

/// m_i = f(x_i) under the given (initial) encoder.
MemoryBank init_bank(const encoder::EncoderParams& enc, const diffkit::Tensor& domain_rows, double momentum,
                     Domain tag);

/// m_i <- momentum * m_i + (1 - momentum) * fresh.
void momentum_update(MemoryBank& bank, std::size_t i, std::span<const double> fresh);

/// Arithmetic mean of all entries, summed in index order.
std::vector<double> bank_mean(const MemoryBank& bank);

}  // namespace uem::membank
