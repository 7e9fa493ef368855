#include "uem/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "uem/error.hpp"

namespace uem::stage2 {

namespace dk = diffkit;

namespace {

void require_nonzero_rows(const Tensor& t, const char* what) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (dk::kernels::l2norm(t.row(r)) == 0.0) {
      throw DomainError(std::string(what) + ": row " + std::to_string(r) + " is a zero vector");
    }
  }
}

Tensor cosine_matrix(const Tensor& x) {
  const Tensor n = dk::kernels::normalize_rows(x);
  return dk::kernels::matmul(n, dk::kernels::transpose(n));
}

double clamped_cosine(std::span<const double> a, std::span<const double> b) {
  return std::clamp(dk::kernels::cosine(a, b), -1.0, 1.0);
}

}  // namespace

Var loss_dal(Var features_joint, std::span<const int> labels, const encoder::DomainClassifierParams& classifier,
             std::span<const Var> bound_classifier) {
  const std::size_t n = features_joint.value().rows();
  if (labels.size() != n) throw ShapeError("loss_dal: label count does not match feature rows");
  Tensor y(dk::Shape{n, 1}), one_minus_y(dk::Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw ContractError("loss_dal: non-binary domain label " + std::to_string(labels[i]) + " at row " +
                          std::to_string(i));
    }
    y[i] = labels[i];
    one_minus_y[i] = 1.0 - labels[i];
  }
  dk::Tape& tape = *features_joint.tape();
  Var g = encoder::classify_domain(classifier, bound_classifier, features_joint);
  Var gc = dk::clamp(g, kProbabilityClamp, 1.0 - kProbabilityClamp);
  Var pos = dk::inner(tape.constant(y), dk::log(gc));
  Var neg = dk::inner(tape.constant(one_minus_y), dk::log(dk::add_scalar(dk::neg(gc), 1.0)));
  return dk::neg(dk::add(pos, neg));
}

Var loss_spr(Var features, const Tensor& frozen_features) {
  const Tensor& f = features.value();
  if (f.shape() != frozen_features.shape()) {
    throw ShapeError("loss_spr: features " + dk::shape_string(f.shape()) + " vs frozen " +
                     dk::shape_string(frozen_features.shape()));
  }
  require_nonzero_rows(f, "loss_spr (current features)");
  require_nonzero_rows(frozen_features, "loss_spr (frozen features)");
  const double b = static_cast<double>(f.rows());
  dk::Tape& tape = *features.tape();

  Var n = dk::normalize_rows(features);
  Var cos_now = dk::matmul(n, dk::transpose(n));
  Var cos_diff = dk::sub(cos_now, tape.constant(cosine_matrix(frozen_features)));
  Var dist_now = dk::pairwise_euclid(features, features);
  Var dist_diff = dk::sub(dist_now, tape.constant(dk::kernels::pairwise_euclid(frozen_features, frozen_features)));
  Var total = dk::add(dk::sum(dk::hadamard(cos_diff, cos_diff)), dk::sum(dk::hadamard(dist_diff, dist_diff)));
  return dk::scale(total, 1.0 / (b * b));
}

double structure_deviation(const Tensor& features, const Tensor& frozen_features) {
  if (features.shape() != frozen_features.shape()) throw ShapeError("structure_deviation: shape mismatch");
  require_nonzero_rows(features, "structure_deviation (current)");
  require_nonzero_rows(frozen_features, "structure_deviation (frozen)");
  const Tensor nc = dk::kernels::normalize_rows(features);
  const Tensor nf = dk::kernels::normalize_rows(frozen_features);
  const std::size_t b = features.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double dc = dk::kernels::inner(nc.row(i), nc.row(j)) - dk::kernels::inner(nf.row(i), nf.row(j));
      const double dd = dk::kernels::euclid(features.row(i), features.row(j)) -
                        dk::kernels::euclid(frozen_features.row(i), frozen_features.row(j));
      total += dc * dc + dd * dd;
    }
  }
  return total / (static_cast<double>(b) * static_cast<double>(b));
}

double snnm_score(std::span<const double> query, std::span<const double> candidate) {
  return (1.0 - clamped_cosine(query, candidate)) * dk::kernels::euclid(query, candidate);
}

std::size_t snnm_search(std::span<const double> query, const Tensor& candidates) {
  if (candidates.rows() == 0 || candidates.size() == 0) throw ContractError("snnm_search: no candidates");
  if (candidates.cols() != query.size()) throw ShapeError("snnm_search: candidate dimension mismatch");
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < candidates.rows(); ++j) {
    const double dist = dk::kernels::euclid(query, candidates.row(j));
    const double score = (1.0 - clamped_cosine(query, candidates.row(j))) * dist;
    if (score < best_score || (score == best_score && dist < best_dist)) {
      best = j;
      best_score = score;
      best_dist = dist;
    }
  }
  return best;
}

std::size_t cosine_search(std::span<const double> query, const Tensor& candidates) {
  if (candidates.cols() != query.size()) throw ShapeError("cosine_search: candidate dimension mismatch");
  std::size_t best = 0;
  double best_cos = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < candidates.rows(); ++j) {
    const double c = clamped_cosine(query, candidates.row(j));
    if (c > best_cos) {
      best_cos = c;
      best = j;
    }
  }
  return best;
}

MatchResult snnm_classify(std::size_t query_id, std::size_t own_prototype, std::size_t matched_id,
                          const Tensor& other_bank, const protostruct::UnifiedStructure& other_structure) {
  if (matched_id >= other_bank.rows()) throw ContractError("snnm_classify: matched id out of range");
  MatchResult m;
  m.query_id = query_id;
  m.own_prototype = own_prototype;
  m.matched_id = matched_id;
  m.translated_prototype = other_structure.unified_id(other(other_structure.domain), own_prototype);
  m.matched_prototype = snnm_search(other_bank.row(matched_id), other_structure.to_tensor());
  m.reliable = m.matched_prototype == m.translated_prototype;
  return m;
}

MatchResult snnm_match(std::size_t query_id, std::span<const double> query_feature, const Tensor& own_prototypes,
                       const Tensor& other_bank, const protostruct::UnifiedStructure& other_structure,
                       Matcher matcher) {
  const std::size_t own = snnm_search(query_feature, own_prototypes);
  if (matcher == Matcher::cosine_only) {
    MatchResult m;
    m.query_id = query_id;
    m.own_prototype = own;
    m.matched_id = cosine_search(query_feature, other_bank);
    m.translated_prototype = other_structure.unified_id(other(other_structure.domain), own);
    m.matched_prototype = m.translated_prototype;
    m.reliable = true;
    m.instance_score = snnm_score(query_feature, other_bank.row(m.matched_id));
    return m;
  }
  const std::size_t matched = snnm_search(query_feature, other_bank);
  MatchResult m = snnm_classify(query_id, own, matched, other_bank, other_structure);
  m.instance_score = snnm_score(query_feature, other_bank.row(matched));
  return m;
}

Var loss_snnm(Var features, const std::vector<std::size_t>& ids, std::span<const MatchResult> matches,
              const Tensor& other_prototypes, const Tensor& other_bank, const stage1::LossConfig& cfg) {
  const std::size_t b = features.value().rows();
  if (b == 0 || matches.size() != b) throw ShapeError("loss_snnm: matches do not match batch");
  const std::size_t c = other_prototypes.rows(), n = other_bank.rows();
  dk::Tape& tape = *features.tape();

  Var f = stage1::similarity_operand(features, ids, cfg);
  Var pt = tape.constant(dk::kernels::transpose(stage1::similarity_operand(other_prototypes, cfg)));
  Var mt = tape.constant(dk::kernels::transpose(stage1::similarity_operand(other_bank, cfg)));
  Var logits = dk::scale(dk::hcat(dk::matmul(f, pt), dk::matmul(f, mt)), 1.0 / cfg.temperature);

  Tensor all(dk::Shape{b, c + n}, 1.0);
  Tensor pos(dk::Shape{b, c + n});
  for (std::size_t i = 0; i < b; ++i) {
    const MatchResult& m = matches[i];
    if (m.translated_prototype >= c || m.matched_id >= n) throw ContractError("loss_snnm: match ids out of range");
    pos.at(i, m.translated_prototype) = 1.0;
    if (m.reliable) pos.at(i, c + m.matched_id) = 1.0;
  }
  Var per_row = dk::sub(dk::masked_logsumexp_rows(logits, all), dk::masked_logsumexp_rows(logits, pos));
  return dk::scale(dk::sum(per_row), 1.0 / static_cast<double>(b));
}

double loss_cdsm(const CdsmTerms& t) { return t.dal + t.spr_a + t.spr_b + t.snnm_a + t.snnm_b; }

double encoder_objective(const CdsmTerms& t) { return -t.dal + t.spr_a + t.spr_b + t.snnm_a + t.snnm_b; }

}  // namespace uem::stage2
