#include "uem/stage1.hpp"

#include <cmath>
#include <string>

#include "uem/error.hpp"

namespace uem::stage1 {

namespace dk = diffkit;

namespace {

void require_batch(const BatchContext& ctx, const char* what) {
  const std::size_t b = ctx.batch();
  if (b == 0) throw ContractError(std::string(what) + ": empty batch");
  if (ctx.features.value().rows() != b) throw ShapeError(std::string(what) + ": feature rows do not match batch ids");
}

// -sum_i [logsumexp_all(row i) - logsumexp_positive(row i)]
Var contrastive(Var logits, const Tensor& positive_mask) {
  Tensor all(logits.value().shape(), 1.0);
  Var lse_all = dk::masked_logsumexp_rows(logits, all);
  Var lse_pos = dk::masked_logsumexp_rows(logits, positive_mask);
  return dk::sum(dk::sub(lse_all, lse_pos));
}

}  // namespace

void LossConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
}

Var similarity_operand(Var features, const std::vector<std::size_t>& ids, const LossConfig& cfg) {
  if (!cfg.normalize_dot) return features;
  const Tensor& f = features.value();
  for (std::size_t r = 0; r < f.rows(); ++r) {
    if (dk::kernels::l2norm(f.row(r)) == 0.0) {
      const std::size_t id = r < ids.size() ? ids[r] : r;
      throw DomainError("zero-norm feature for instance " + std::to_string(id));
    }
  }
  return dk::normalize_rows(features);
}

Tensor similarity_operand(const Tensor& constants, const LossConfig& cfg) {
  return cfg.normalize_dot ? dk::kernels::normalize_rows(constants) : constants;
}

Var loss_ince(const BatchContext& ctx, const LossConfig& cfg) {
  require_batch(ctx, "loss_ince");
  const std::size_t b = ctx.batch();
  if (ctx.bank_entries.rows() != b) throw ShapeError("loss_ince: bank rows do not match batch");
  dk::Tape& tape = *ctx.features.tape();
  Var f = similarity_operand(ctx.features, ctx.ids, cfg);
  Var m = tape.constant(dk::kernels::transpose(similarity_operand(ctx.bank_entries, cfg)));
  Var logits = dk::scale(dk::matmul(f, m), 1.0 / cfg.temperature);
  Tensor mask(dk::Shape{b, b});
  for (std::size_t i = 0; i < b; ++i) mask.at(i, i) = 1.0;
  return contrastive(logits, mask);
}

Var loss_pnce(const BatchContext& ctx, const LossConfig& cfg) {
  require_batch(ctx, "loss_pnce");
  const std::size_t b = ctx.batch(), c = ctx.prototypes.rows();
  if (ctx.assignments.size() != b) throw ShapeError("loss_pnce: assignments do not match batch");
  for (std::size_t i = 0; i < b; ++i) {
    if (ctx.assignments[i] >= c) {
      throw ContractError("loss_pnce: instance " + std::to_string(ctx.ids[i]) + " assigned to prototype " +
                          std::to_string(ctx.assignments[i]) + " of " + std::to_string(c));
    }
  }
  dk::Tape& tape = *ctx.features.tape();
  Var f = similarity_operand(ctx.features, ctx.ids, cfg);
  Var p = tape.constant(dk::kernels::transpose(similarity_operand(ctx.prototypes, cfg)));
  Var logits = dk::scale(dk::matmul(f, p), 1.0 / cfg.temperature);
  Tensor mask(dk::Shape{b, c});
  for (std::size_t i = 0; i < b; ++i) mask.at(i, ctx.assignments[i]) = 1.0;
  return contrastive(logits, mask);
}

Var loss_sel(const BatchContext& ctx, const LossConfig& cfg) {
  require_batch(ctx, "loss_sel");
  const std::size_t b = ctx.batch();
  dk::Tape& tape = *ctx.features.tape();
  Var f = similarity_operand(ctx.features, ctx.ids, cfg);
  Var pt = tape.constant(dk::kernels::transpose(similarity_operand(ctx.prototypes, cfg)));
  Var weights = dk::softmax_rows(dk::scale(dk::matmul(f, pt), 1.0 / cfg.temperature));
  if (!cfg.sel_weight_gradient) weights = dk::detach(weights);
  Var dist = dk::pairwise_euclid(ctx.features, tape.constant(ctx.prototypes));
  return dk::scale(dk::sum(dk::hadamard(weights, dist)), 1.0 / static_cast<double>(b));
}

double alpha(double epoch, double total_epochs) { return 1.0 / (1.0 + std::exp(0.5 * total_epochs - epoch)); }

IdseTerms loss_idse(const BatchContext& a, const BatchContext& b, const LossConfig& cfg, double epoch,
                    double total_epochs, bool use_sel, bool use_prototypes) {
  IdseTerms t;
  t.alpha = use_prototypes ? alpha(epoch, total_epochs) : 0.0;

  Var ince_a = loss_ince(a, cfg);
  Var ince_b = loss_ince(b, cfg);
  t.ince_a = ince_a.value().item();
  t.ince_b = ince_b.value().item();
  if (!use_prototypes) {
    t.total = dk::add(ince_a, ince_b);
    return t;
  }

  Var pnce_a = loss_pnce(a, cfg);
  Var pnce_b = loss_pnce(b, cfg);
  t.pnce_a = pnce_a.value().item();
  t.pnce_b = pnce_b.value().item();
  Var ipm_a = dk::add(ince_a, dk::scale(pnce_a, t.alpha));
  Var ipm_b = dk::add(ince_b, dk::scale(pnce_b, t.alpha));
  Var total = dk::add(ipm_a, ipm_b);

  if (use_sel) {
    Var sel_a = loss_sel(a, cfg);
    Var sel_b = loss_sel(b, cfg);
    t.sel_a = sel_a.value().item();
    t.sel_b = sel_b.value().item();
    total = dk::add(total, dk::scale(dk::add(sel_a, sel_b), t.alpha));
  }
  t.total = total;
  return t;
}

}  // namespace uem::stage1
