#include "uem/membank.hpp"

#include <string>

#include "uem/error.hpp"

namespace uem::membank {

MemoryBank init_bank(const encoder::EncoderParams& enc, const diffkit::Tensor& domain_rows, double momentum,
                     Domain tag) {
  if (domain_rows.rank() != 2 || domain_rows.size() == 0) {
    throw DataError("init_bank: domain " + std::string(to_string(tag)) + " is empty");
  }
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw ConfigError("momentum must lie in [0, 1]");
  return MemoryBank{encoder::encode(enc, domain_rows), momentum, tag};
}

void momentum_update(MemoryBank& bank, std::size_t i, std::span<const double> fresh) {
  if (i >= bank.size()) {
    throw ContractError("momentum_update: index " + std::to_string(i) + " out of range for bank of " +
                        std::to_string(bank.size()));
  }
  if (fresh.size() != bank.dim()) {
    throw ShapeError("momentum_update: feature length " + std::to_string(fresh.size()) + " vs bank dim " +
                     std::to_string(bank.dim()));
  }
  const double beta = bank.momentum;
  auto row = bank.entries.row(i);
  for (std::size_t k = 0; k < row.size(); ++k) row[k] = beta * row[k] + (1.0 - beta) * fresh[k];
}

std::vector<double> bank_mean(const MemoryBank& bank) {
  std::vector<double> mean(bank.dim(), 0.0);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    auto row = bank.entry(i);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += row[k];
  }
  for (double& m : mean) m /= static_cast<double>(bank.size());
  return mean;
}

}  // namespace uem::membank
