#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uem/clustering.hpp"
#include "uem/diffkit.hpp"
#include "uem/encoder.hpp"
#include "uem/membank.hpp"
#include "uem/protostruct.hpp"
#include "uem/stage1.hpp"

namespace uem::trainer {

using diffkit::Tensor;

struct Ablation {
  bool disable_prototype_merging = false;
  bool disable_sel = false;
  /// Stage 2 without the pairwise-structure regulation.
  bool plain_adversarial = false;
  /// Cosine-nearest instance matching in place of the switchable matcher.
  bool cosine_only_matcher = false;
  /// Stage 1 keeps only instance discrimination; stage 2 is skipped.
  bool instance_only = false;
};

struct TrainConfig {
  std::size_t epochs1 = 2;
  std::size_t epochs2 = 20;
  std::size_t batch_size = 64;
  double lr0 = 2e-4;
  double momentum = 0.9;
  double temperature = 0.07;
  double bank_momentum = 0.99;
  /// Weight of -L_DAL in the encoder objective of stage 2.
  double adv_weight = 0.3;
  /// Classifier learning rate relative to the encoder's.
  double classifier_lr_scale = 10.0;
  std::uint64_t seed = 0;
  Ablation ablation;
  /// Elbow range; 0 picks clustering::default_k_range.
  std::size_t k_min = 0;
  std::size_t k_max = 0;
  std::size_t kmeans_restarts = 4;
  std::vector<std::size_t> hidden;
  encoder::Init init = encoder::Init::orthogonal;
  std::size_t d_out = 32;
  std::size_t classifier_hidden = 64;
  bool sel_weight_gradient = false;
  bool normalize_dot = true;

  void validate() const;
  stage1::LossConfig loss_config() const;
};

/// Shuffled batches of one epoch. Every instance of each domain appears in
/// exactly one batch; both domains get the same number of batches.
struct EpochPlan {
  std::vector<std::vector<std::size_t>> batches_a;
  std::vector<std::vector<std::size_t>> batches_b;
  std::size_t steps() const { return batches_a.size(); }
};

std::size_t steps_per_epoch(std::size_t n_a, std::size_t n_b, std::size_t batch_size);
EpochPlan plan_epoch(std::size_t n_a, std::size_t n_b, std::size_t batch_size, Rng& rng);

/// Prototype structures of both domains for one epoch.
struct Structures {
  clustering::Clustering clusters_a, clusters_b;
  protostruct::UnifiedStructure unified_a, unified_b;
  Tensor unified_a_tensor, unified_b_tensor;
  /// Unified prototype id of every instance (through its own cluster).
  std::vector<std::size_t> assign_a, assign_b;
};

Structures refresh_structures(const membank::MemoryBank& bank_a, const membank::MemoryBank& bank_b,
                              const TrainConfig& cfg, std::uint64_t seed);

struct TrainState {
  TrainConfig config;
  encoder::EncoderParams encoder;
  encoder::DomainClassifierParams classifier;
  /// Stage-1 snapshot used by the structure regulation.
  std::optional<encoder::EncoderParams> frozen;
  membank::MemoryBank bank_a, bank_b;
  std::vector<Tensor> velocity_encoder, velocity_classifier;
  std::size_t global_step = 0;
  std::size_t stage1_epochs_done = 0;
  std::size_t stage2_epochs_done = 0;
};

/// CSV logs accumulated across both stages.
struct TrainLogs {
  std::string stage1;
  std::string stage2;
  std::string lr;
  std::string match_audit;
  std::vector<double> alphas;
  /// Pairwise-structure deviation to the snapshot on the full datasets,
  /// measured at the end of every stage-2 epoch.
  std::vector<double> structure_deviation;
};

/// Fresh state: seeded encoder/classifier initialization and memory banks.
TrainState init_state(const TrainConfig& cfg, const Tensor& data_a, const Tensor& data_b);

std::size_t total_steps(const TrainConfig& cfg, std::size_t n_a, std::size_t n_b);

void run_stage1(TrainState& state, const Tensor& data_a, const Tensor& data_b, TrainLogs& logs);
void run_stage2(TrainState& state, const Tensor& data_a, const Tensor& data_b, TrainLogs& logs);

/// Both stages from a fresh state.
TrainState train(const TrainConfig& cfg, const Tensor& data_a, const Tensor& data_b, TrainLogs& logs);

std::string encoder_hash(const encoder::EncoderParams& enc);

}  // namespace uem::trainer
