#pragma once

#include <cstddef>
#include <vector>

#include "uem/diffkit.hpp"

namespace uem::stage1 {

using diffkit::Tensor;
using diffkit::Var;

struct LossConfig {
  double temperature = 0.07;
  std::size_t batch_size = 64;
  /// Let gradients flow through the softmax weights of the semantic-enhanced
  /// loss. Off: the weights are constants.
  bool sel_weight_gradient = false;
  /// Temperature-scaled inner products use L2-normalized operands.
  bool normalize_dot = true;

  void validate() const;
};

/// One domain's view of a training batch.
struct BatchContext {
  std::vector<std::size_t> ids;         // instance ids, used in diagnostics
  Var features;                         // B x d fresh encoder outputs
  Tensor bank_entries;                  // B x d memory-bank rows of the same instances
  Tensor prototypes;                    // C x d unified prototypes of this domain
  std::vector<std::size_t> assignments; // unified prototype id per instance

  std::size_t batch() const { return ids.size(); }
};

/// Features prepared for temperature-scaled similarities: row-normalized when
/// cfg.normalize_dot is set (zero rows throw DomainError naming the instance).
Var similarity_operand(Var features, const std::vector<std::size_t>& ids, const LossConfig& cfg);
Tensor similarity_operand(const Tensor& constants, const LossConfig& cfg);

/// Instance discrimination against the batch's own bank entries:
///   sum_i -log softmax_j(<f_i, m_j> / tau)[i].
Var loss_ince(const BatchContext& ctx, const LossConfig& cfg);

/// Prototypical contrastive loss against the unified prototypes:
///   sum_i -log softmax_c(<f_i, p_c> / tau)[c_i].
Var loss_pnce(const BatchContext& ctx, const LossConfig& cfg);

/// Semantic-enhanced loss: (1/B) sum_i sum_c w_ic * ||f_i - p_c|| with
/// w = row-softmax(<f_i, p_c> / tau).
Var loss_sel(const BatchContext& ctx, const LossConfig& cfg);

/// Progressive weight 1 / (1 + exp(0.5 E - e)).
double alpha(double epoch, double total_epochs);

struct IdseTerms {
  Var total;
  double alpha = 0.0;
  double ince_a = 0.0, pnce_a = 0.0, sel_a = 0.0;
  double ince_b = 0.0, pnce_b = 0.0, sel_b = 0.0;
};

/// (INCE_A + a PNCE_A) + (INCE_B + a PNCE_B) + a (SEL_A + SEL_B).
/// With use_sel == false the SEL terms are dropped; with use_prototypes ==
/// false only the instance terms remain (instance-discrimination ablation).
IdseTerms loss_idse(const BatchContext& a, const BatchContext& b, const LossConfig& cfg, double epoch,
                    double total_epochs, bool use_sel = true, bool use_prototypes = true);

}  // namespace uem::stage1
