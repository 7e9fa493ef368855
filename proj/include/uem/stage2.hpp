#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uem/diffkit.hpp"
#include "uem/encoder.hpp"
#include "uem/protostruct.hpp"
#include "uem/stage1.hpp"

namespace uem::stage2 {

using diffkit::Tensor;
using diffkit::Var;

/// Lower/upper clamp applied to classifier probabilities inside the
/// cross-entropy.
inline constexpr double kProbabilityClamp = 1e-7;

/// Domain-classification cross-entropy summed over every row of
/// features_joint: -y log g - (1 - y) log(1 - g). Labels are 1 for domain A and
/// 0 for domain B. Gradients reach both the classifier leaves (bound_classifier)
/// and whatever produced features_joint.
Var loss_dal(Var features_joint, std::span<const int> labels, const encoder::DomainClassifierParams& classifier,
             std::span<const Var> bound_classifier);

/// Pairwise-structure regulation for one domain batch:
///   (1/B^2) sum_{i,j} (cos(i,j) - cos'(i,j))^2 + (d(i,j) - d'(i,j))^2
/// where primed quantities come from the frozen snapshot features. Self-pairs
/// are included.
Var loss_spr(Var features, const Tensor& frozen_features);

/// The same quantity evaluated without a tape (used for monitoring).
double structure_deviation(const Tensor& features, const Tensor& frozen_features);

/// (1 - cos(f, c)) * ||f - c||. Zero vectors throw DomainError.
double snnm_score(std::span<const double> query, std::span<const double> candidate);

/// argmin of snnm_score over candidate rows; ties by smaller distance, then
/// lower id.
std::size_t snnm_search(std::span<const double> query, const Tensor& candidates);

/// argmax cosine similarity (ablation matcher); ties to the lower id.
std::size_t cosine_search(std::span<const double> query, const Tensor& candidates);

/// Outcome of matching one query instance (domain X) into the other domain Y.
struct MatchResult {
  std::size_t query_id = 0;
  /// Nearest pre-merge prototype of the query in its own domain.
  std::size_t own_prototype = 0;
  /// Matched instance of the other domain (row of its memory bank).
  std::size_t matched_id = 0;
  /// Unified id in Y' of the query's own prototype after translation/merge.
  std::size_t translated_prototype = 0;
  /// Nearest unified prototype in Y' of the matched instance.
  std::size_t matched_prototype = 0;
  bool reliable = false;
  double instance_score = 0.0;
};

enum class Matcher { switchable, cosine_only };

/// Run the prototype search, cross-domain instance search and reliability
/// classification for one query feature. own_prototypes are the query
/// domain's pre-merge cluster centers, other_bank the other domain's memory
/// bank and other_structure the other domain's unified structure.
MatchResult snnm_match(std::size_t query_id, std::span<const double> query_feature, const Tensor& own_prototypes,
                       const Tensor& other_bank, const protostruct::UnifiedStructure& other_structure,
                       Matcher matcher = Matcher::switchable);

/// Reliability classification given the searches already done.
MatchResult snnm_classify(std::size_t query_id, std::size_t own_prototype, std::size_t matched_id,
                          const Tensor& other_bank, const protostruct::UnifiedStructure& other_structure);

/// Matched contrastive loss of one direction:
///   (1/B) sum_i -log [ Delta_i / (sum_c exp(<f_i, p_c>/tau) + sum_j exp(<f_i, m_j>/tau)) ]
/// with Delta_i = exp(<f_i, p~_i>/tau) (+ exp(<f_i, m_match>/tau) when reliable).
/// other_prototypes is Y' as a tensor, other_bank Y's memory bank.
Var loss_snnm(Var features, const std::vector<std::size_t>& ids, std::span<const MatchResult> matches,
              const Tensor& other_prototypes, const Tensor& other_bank, const stage1::LossConfig& cfg);

struct CdsmTerms {
  double dal = 0.0;
  double spr_a = 0.0, spr_b = 0.0;
  double snnm_a = 0.0, snnm_b = 0.0;
};

/// DAL + SPR_A + SPR_B + SNNM_A + SNNM_B.
double loss_cdsm(const CdsmTerms& t);

/// Objective minimized by the feature extractor in the alternating scheme:
/// -DAL + SPR_A + SPR_B + SNNM_A + SNNM_B.
double encoder_objective(const CdsmTerms& t);

}  // namespace uem::stage2
