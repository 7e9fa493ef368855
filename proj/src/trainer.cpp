#include "uem/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "uem/error.hpp"
#include "uem/hashing.hpp"
#include "uem/log.hpp"
#include "uem/rng.hpp"
#include "uem/stage2.hpp"
#include "uem/textio.hpp"

namespace uem::trainer {

namespace dk = diffkit;

namespace {

std::string fmt(double v) { return textio::format_double(v); }

std::uint64_t stream_seed(std::uint64_t seed, const std::string& name) { return Rng::stream(seed, name).next_u64(); }

std::vector<std::size_t> pick(const std::vector<std::size_t>& all, const std::vector<std::size_t>& ids) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) out.push_back(all[i]);
  return out;
}

void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + term);
}

template <typename Fn>
void with_context(const std::string& where, Fn&& fn) {
  try {
    fn();
  } catch (const NumericError& e) {
    throw NumericError(where + ": " + e.what());
  } catch (const DomainError& e) {
    throw NumericError(where + ": " + e.what());
  }
}

std::vector<Tensor> collect(const dk::Gradients& g, const std::vector<dk::Var>& vars) {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (const dk::Var& v : vars) out.push_back(g[v]);
  return out;
}

void update_bank(membank::MemoryBank& bank, const std::vector<std::size_t>& ids, const Tensor& fresh) {
  for (std::size_t r = 0; r < ids.size(); ++r) membank::momentum_update(bank, ids[r], fresh.row(r));
}

// instance-only spends the whole budget in stage 1
std::size_t stage1_epochs(const TrainConfig& cfg) {
  return cfg.ablation.instance_only ? cfg.epochs1 + cfg.epochs2 : cfg.epochs1;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("train.lr0 must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (!(temperature > 0.0)) throw ConfigError("stage1.temperature must be positive");
  if (!(bank_momentum >= 0.0 && bank_momentum < 1.0)) throw ConfigError("stage1.bank_momentum must lie in [0, 1)");
  if (!(adv_weight >= 0.0) || !std::isfinite(adv_weight)) throw ConfigError("stage2.adv_weight must be non-negative");
  if (!(classifier_lr_scale > 0.0) || !std::isfinite(classifier_lr_scale))
    throw ConfigError("stage2.classifier_lr_scale must be positive");
  if (d_out < 1) throw ConfigError("model.d_out must be at least 1");
  if (classifier_hidden < 1) throw ConfigError("model.classifier_hidden must be at least 1");
  for (std::size_t h : hidden)
    if (h < 1) throw ConfigError("model.hidden widths must be positive");
  if (kmeans_restarts < 1) throw ConfigError("cluster.restarts must be at least 1");
  if (k_min != 0 && k_min < 2) throw ConfigError("cluster.k_min must be at least 2");
  if (k_min != 0 && k_max != 0 && k_max <= k_min) throw ConfigError("cluster.k_max must exceed cluster.k_min");
}

stage1::LossConfig TrainConfig::loss_config() const {
  stage1::LossConfig c;
  c.temperature = temperature;
  c.batch_size = batch_size;
  c.sel_weight_gradient = sel_weight_gradient;
  c.normalize_dot = normalize_dot;
  return c;
}

std::size_t steps_per_epoch(std::size_t n_a, std::size_t n_b, std::size_t batch_size) {
  if (n_a == 0 || n_b == 0) throw DataError("both domains need at least one instance");
  return std::max((n_a + batch_size - 1) / batch_size, (n_b + batch_size - 1) / batch_size);
}

EpochPlan plan_epoch(std::size_t n_a, std::size_t n_b, std::size_t batch_size, Rng& rng) {
  const std::size_t steps = steps_per_epoch(n_a, n_b, batch_size);
  auto split = [&](std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<std::vector<std::size_t>> out(steps);
    if (n >= steps) {
      std::size_t pos = 0;
      for (std::size_t j = 0; j < steps; ++j) {
        const std::size_t len = n / steps + (j < n % steps ? 1 : 0);
        out[j].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                      perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
      }
    } else {
      // smaller domain: one instance per step, cycling
      for (std::size_t j = 0; j < steps; ++j) out[j].push_back(perm[j % n]);
    }
    return out;
  };
  EpochPlan plan;
  plan.batches_a = split(n_a);
  plan.batches_b = split(n_b);
  return plan;
}

Structures refresh_structures(const membank::MemoryBank& bank_a, const membank::MemoryBank& bank_b,
                              const TrainConfig& cfg, std::uint64_t seed) {
  clustering::KMeansOptions opts;
  opts.restarts = cfg.kmeans_restarts;
  auto fit = [&](const Tensor& x, std::uint64_t s) {
    auto [lo, hi] = clustering::default_k_range(x.rows());
    if (cfg.k_min != 0) lo = cfg.k_min;
    if (cfg.k_max != 0) hi = cfg.k_max;
    hi = std::min(hi, x.rows());
    lo = std::min(lo, x.rows());
    if (lo >= 2 && lo < hi) return clustering::elbow(x, lo, hi, s, opts).clustering;
    return clustering::kmeans(x, std::max<std::size_t>(lo, 1), s, opts);
  };
  Structures st;
  st.clusters_a = fit(bank_a.entries, seed);
  st.clusters_b = fit(bank_b.entries, seed ^ 0x9e3779b97f4a7c15ULL);

  const auto pa = protostruct::PrototypeSet::from_tensor(st.clusters_a.centers, Domain::a);
  const auto pb = protostruct::PrototypeSet::from_tensor(st.clusters_b.centers, Domain::b);
  const auto mean_a = membank::bank_mean(bank_a);
  const auto mean_b = membank::bank_mean(bank_b);
  const bool merge = !cfg.ablation.disable_prototype_merging;
  st.unified_a = protostruct::build_unified(pa, protostruct::translate(pb, mean_b, mean_a, Domain::a), merge);
  st.unified_b = protostruct::build_unified(pb, protostruct::translate(pa, mean_a, mean_b, Domain::b), merge);
  st.unified_a_tensor = st.unified_a.to_tensor();
  st.unified_b_tensor = st.unified_b.to_tensor();
  for (std::size_t c : st.clusters_a.assignments) st.assign_a.push_back(st.unified_a.own_to_unified[c]);
  for (std::size_t c : st.clusters_b.assignments) st.assign_b.push_back(st.unified_b.own_to_unified[c]);
  return st;
}

TrainState init_state(const TrainConfig& cfg, const Tensor& data_a, const Tensor& data_b) {
  cfg.validate();
  if (data_a.rows() == 0 || data_b.rows() == 0 || data_a.size() == 0 || data_b.size() == 0)
    throw DataError("both domains need at least one instance");
  if (data_a.cols() != data_b.cols()) {
    throw DataError("feature dimension differs between domains (" + std::to_string(data_a.cols()) + " vs " +
                    std::to_string(data_b.cols()) + ")");
  }
  TrainState s;
  s.config = cfg;
  Rng init = Rng::stream(cfg.seed, "init");
  s.encoder = encoder::make_encoder(data_a.cols(), cfg.hidden, cfg.d_out, init, cfg.init);
  s.classifier = encoder::make_classifier(cfg.d_out, cfg.classifier_hidden, init);
  s.bank_a = membank::init_bank(s.encoder, data_a, cfg.bank_momentum, Domain::a);
  s.bank_b = membank::init_bank(s.encoder, data_b, cfg.bank_momentum, Domain::b);
  return s;
}

std::size_t total_steps(const TrainConfig& cfg, std::size_t n_a, std::size_t n_b) {
  return (cfg.epochs1 + cfg.epochs2) * steps_per_epoch(n_a, n_b, cfg.batch_size);
}

void run_stage1(TrainState& state, const Tensor& data_a, const Tensor& data_b, TrainLogs& logs) {
  const TrainConfig& cfg = state.config;
  const stage1::LossConfig lcfg = cfg.loss_config();
  const bool protos = !cfg.ablation.instance_only;
  const bool sel = protos && !cfg.ablation.disable_sel;
  const std::size_t total = total_steps(cfg, data_a.rows(), data_b.rows());

  if (logs.stage1.empty()) {
    logs.stage1 = "epoch";
    if (protos) logs.stage1 += ",alpha,k_a,k_b,unified_a,unified_b,merged";
    logs.stage1 += ",loss,ince_a,ince_b";
    if (protos) logs.stage1 += ",pnce_a,pnce_b";
    if (sel) logs.stage1 += ",sel_a,sel_b";
    logs.stage1 += ",lr\n";
  }
  if (logs.lr.empty()) logs.lr = "step,stage,epoch,batch,lr\n";

  for (std::size_t epoch = state.stage1_epochs_done; epoch < stage1_epochs(cfg); ++epoch) {
    Structures st;
    if (protos) {
      with_context("stage 1 epoch " + std::to_string(epoch) + " structure refresh", [&] {
        st = refresh_structures(state.bank_a, state.bank_b, cfg,
                                stream_seed(cfg.seed, "kmeans-s1-e" + std::to_string(epoch)));
      });
    }
    Rng shuffle = Rng::stream(cfg.seed, "shuffle-s1-e" + std::to_string(epoch));
    const EpochPlan plan = plan_epoch(data_a.rows(), data_b.rows(), cfg.batch_size, shuffle);
    const double alpha = protos ? stage1::alpha(static_cast<double>(epoch), static_cast<double>(cfg.epochs1)) : 0.0;

    double sum_loss = 0, ia = 0, ib = 0, pa = 0, pb = 0, sa = 0, sb = 0, lr = 0;
    for (std::size_t b = 0; b < plan.steps(); ++b) {
      const auto& ids_a = plan.batches_a[b];
      const auto& ids_b = plan.batches_b[b];
      with_context("stage 1 epoch " + std::to_string(epoch) + " batch " + std::to_string(b), [&] {
        dk::Tape tape;
        const std::vector<dk::Var> theta = encoder::bind(tape, state.encoder);
        dk::Var fa = encoder::encode(state.encoder, theta, tape.constant(dk::gather_rows(data_a, ids_a)));
        dk::Var fb = encoder::encode(state.encoder, theta, tape.constant(dk::gather_rows(data_b, ids_b)));
        stage1::BatchContext ca{ids_a, fa, dk::gather_rows(state.bank_a.entries, ids_a), {}, {}};
        stage1::BatchContext cb{ids_b, fb, dk::gather_rows(state.bank_b.entries, ids_b), {}, {}};
        if (protos) {
          ca.prototypes = st.unified_a_tensor;
          cb.prototypes = st.unified_b_tensor;
          ca.assignments = pick(st.assign_a, ids_a);
          cb.assignments = pick(st.assign_b, ids_b);
        }
        const stage1::IdseTerms t =
            stage1::loss_idse(ca, cb, lcfg, static_cast<double>(epoch), static_cast<double>(cfg.epochs1), sel, protos);
        const double loss = t.total.value().item();
        check_finite(loss, "L_IDSE");
        const dk::Gradients g = tape.backward(t.total);
        lr = encoder::cosine_lr(state.global_step, total, cfg.lr0);
        auto params = state.encoder.parameters();
        encoder::sgd_apply(params, collect(g, theta), state.velocity_encoder, cfg.momentum, lr, "L_IDSE");
        update_bank(state.bank_a, ids_a, fa.value());
        update_bank(state.bank_b, ids_b, fb.value());

        logs.lr += std::to_string(state.global_step) + ",1," + std::to_string(epoch) + "," + std::to_string(b) + "," +
                   fmt(lr) + "\n";
        ++state.global_step;
        sum_loss += loss;
        ia += t.ince_a;
        ib += t.ince_b;
        pa += t.pnce_a;
        pb += t.pnce_b;
        sa += t.sel_a;
        sb += t.sel_b;
      });
    }
    const double n = static_cast<double>(plan.steps());
    std::string row = std::to_string(epoch);
    if (protos) {
      row += "," + fmt(alpha) + "," + std::to_string(st.clusters_a.k()) + "," + std::to_string(st.clusters_b.k()) +
             "," + std::to_string(st.unified_a.size()) + "," + std::to_string(st.unified_b.size()) + "," +
             std::to_string(st.unified_b.merged_pairs.size());
      logs.alphas.push_back(alpha);
    }
    row += "," + fmt(sum_loss / n) + "," + fmt(ia / n) + "," + fmt(ib / n);
    if (protos) row += "," + fmt(pa / n) + "," + fmt(pb / n);
    if (sel) row += "," + fmt(sa / n) + "," + fmt(sb / n);
    row += "," + fmt(lr) + "\n";
    logs.stage1 += row;
    log::info("stage 1 epoch " + std::to_string(epoch) + " loss " + fmt(sum_loss / n));
    state.stage1_epochs_done = epoch + 1;
  }
}

void run_stage2(TrainState& state, const Tensor& data_a, const Tensor& data_b, TrainLogs& logs) {
  const TrainConfig& cfg = state.config;
  if (cfg.ablation.instance_only) return;
  if (state.stage1_epochs_done < cfg.epochs1) throw ContractError("stage 2 needs a completed stage 1");
  const stage1::LossConfig lcfg = cfg.loss_config();
  const bool spr = !cfg.ablation.plain_adversarial;
  const stage2::Matcher matcher =
      cfg.ablation.cosine_only_matcher ? stage2::Matcher::cosine_only : stage2::Matcher::switchable;
  const std::size_t total = total_steps(cfg, data_a.rows(), data_b.rows());

  if (!state.frozen) state.frozen = state.encoder;
  const encoder::EncoderParams& frozen = *state.frozen;
  const std::string frozen_hash = encoder_hash(frozen);

  if (logs.stage2.empty()) {
    logs.stage2 = "epoch,k_a,k_b,unified_a,unified_b,merged,dal";
    if (spr) logs.stage2 += ",spr_a,spr_b";
    logs.stage2 += ",snnm_a,snnm_b,reliable_a,reliable_b,structure_deviation,lr\n";
  }
  if (logs.lr.empty()) logs.lr = "step,stage,epoch,batch,lr\n";
  if (logs.match_audit.empty()) {
    logs.match_audit =
        "epoch,batch,direction,query_id,own_prototype,matched_id,translated_prototype,matched_prototype,reliable,"
        "instance_score\n";
  }
  const std::vector<int> ones_all(cfg.batch_size + data_a.rows() + data_b.rows(), 1);
  const std::vector<int> zeros_all(ones_all.size(), 0);
  const Tensor frozen_a = encoder::encode(frozen, data_a);
  const Tensor frozen_b = encoder::encode(frozen, data_b);

  for (std::size_t epoch = state.stage2_epochs_done; epoch < cfg.epochs2; ++epoch) {
    Structures st;
    with_context("stage 2 epoch " + std::to_string(epoch) + " structure refresh", [&] {
      st = refresh_structures(state.bank_a, state.bank_b, cfg,
                              stream_seed(cfg.seed, "kmeans-s2-e" + std::to_string(epoch)));
    });
    Rng shuffle = Rng::stream(cfg.seed, "shuffle-s2-e" + std::to_string(epoch));
    const EpochPlan plan = plan_epoch(data_a.rows(), data_b.rows(), cfg.batch_size, shuffle);

    double dal_sum = 0, spr_a = 0, spr_b = 0, sn_a = 0, sn_b = 0, lr = 0;
    std::size_t rel_a = 0, rel_b = 0, cnt_a = 0, cnt_b = 0;
    for (std::size_t b = 0; b < plan.steps(); ++b) {
      const auto& ids_a = plan.batches_a[b];
      const auto& ids_b = plan.batches_b[b];
      const std::string where = "stage 2 epoch " + std::to_string(epoch) + " batch " + std::to_string(b);
      with_context(where, [&] {
        const Tensor xa = dk::gather_rows(data_a, ids_a);
        const Tensor xb = dk::gather_rows(data_b, ids_b);
        const std::span<const int> ya(ones_all.data(), ids_a.size());
        const std::span<const int> yb(zeros_all.data(), ids_b.size());
        lr = encoder::cosine_lr(state.global_step, total, cfg.lr0);

        // classifier step on L_DAL
        {
          dk::Tape tape;
          const std::vector<dk::Var> omega = encoder::bind(tape, state.classifier);
          dk::Var fa = tape.constant(encoder::encode(state.encoder, xa));
          dk::Var fb = tape.constant(encoder::encode(state.encoder, xb));
          dk::Var dal = dk::add(stage2::loss_dal(fa, ya, state.classifier, omega),
                                stage2::loss_dal(fb, yb, state.classifier, omega));
          check_finite(dal.value().item(), "L_DAL");
          const dk::Gradients g = tape.backward(dal);
          auto params = state.classifier.parameters();
          encoder::sgd_apply(params, collect(g, omega), state.velocity_classifier, cfg.momentum,
                             lr * cfg.classifier_lr_scale,
                             "L_DAL (classifier)");
        }

        // encoder step on -L_DAL + L_SPR + L_SNNM
        dk::Tape tape;
        const std::vector<dk::Var> theta = encoder::bind(tape, state.encoder);
        const std::vector<dk::Var> omega = encoder::bind_constant(tape, state.classifier);
        dk::Var fa = encoder::encode(state.encoder, theta, tape.constant(xa));
        dk::Var fb = encoder::encode(state.encoder, theta, tape.constant(xb));
        dk::Var dal = dk::add(stage2::loss_dal(fa, ya, state.classifier, omega),
                              stage2::loss_dal(fb, yb, state.classifier, omega));
        dk::Var objective = dk::scale(dal, -cfg.adv_weight);
        if (spr) {
          dk::Var la = stage2::loss_spr(fa, dk::gather_rows(frozen_a, ids_a));
          dk::Var lb = stage2::loss_spr(fb, dk::gather_rows(frozen_b, ids_b));
          spr_a += la.value().item();
          spr_b += lb.value().item();
          objective = dk::add(objective, dk::add(la, lb));
        }
        std::vector<stage2::MatchResult> ma, mb;
        for (std::size_t r = 0; r < ids_a.size(); ++r) {
          ma.push_back(stage2::snnm_match(ids_a[r], fa.value().row(r), st.clusters_a.centers, state.bank_b.entries,
                                          st.unified_b, matcher));
        }
        for (std::size_t r = 0; r < ids_b.size(); ++r) {
          mb.push_back(stage2::snnm_match(ids_b[r], fb.value().row(r), st.clusters_b.centers, state.bank_a.entries,
                                          st.unified_a, matcher));
        }
        dk::Var na = stage2::loss_snnm(fa, ids_a, ma, st.unified_b_tensor, state.bank_b.entries, lcfg);
        dk::Var nb = stage2::loss_snnm(fb, ids_b, mb, st.unified_a_tensor, state.bank_a.entries, lcfg);
        objective = dk::add(objective, dk::add(na, nb));
        check_finite(objective.value().item(), "stage 2 encoder objective");
        const dk::Gradients g = tape.backward(objective);
        auto params = state.encoder.parameters();
        encoder::sgd_apply(params, collect(g, theta), state.velocity_encoder, cfg.momentum, lr,
                           "stage 2 encoder objective");
        update_bank(state.bank_a, ids_a, fa.value());
        update_bank(state.bank_b, ids_b, fb.value());

        auto audit = [&](const std::vector<stage2::MatchResult>& ms, const char* dir) {
          for (const stage2::MatchResult& m : ms) {
            logs.match_audit += std::to_string(epoch) + "," + std::to_string(b) + "," + dir + "," +
                                std::to_string(m.query_id) + "," + std::to_string(m.own_prototype) + "," +
                                std::to_string(m.matched_id) + "," + std::to_string(m.translated_prototype) + "," +
                                std::to_string(m.matched_prototype) + "," + (m.reliable ? "1" : "0") + "," +
                                fmt(m.instance_score) + "\n";
          }
        };
        audit(ma, "A->B");
        audit(mb, "B->A");
        for (const auto& m : ma) rel_a += m.reliable ? 1 : 0;
        for (const auto& m : mb) rel_b += m.reliable ? 1 : 0;
        cnt_a += ma.size();
        cnt_b += mb.size();
        dal_sum += dal.value().item();
        sn_a += na.value().item();
        sn_b += nb.value().item();
        logs.lr += std::to_string(state.global_step) + ",2," + std::to_string(epoch) + "," + std::to_string(b) + "," +
                   fmt(lr) + "\n";
        ++state.global_step;
      });
    }
    const double deviation = stage2::structure_deviation(encoder::encode(state.encoder, data_a), frozen_a) +
                             stage2::structure_deviation(encoder::encode(state.encoder, data_b), frozen_b);
    logs.structure_deviation.push_back(deviation);
    const double n = static_cast<double>(plan.steps());
    std::string row = std::to_string(epoch) + "," + std::to_string(st.clusters_a.k()) + "," +
                      std::to_string(st.clusters_b.k()) + "," + std::to_string(st.unified_a.size()) + "," +
                      std::to_string(st.unified_b.size()) + "," + std::to_string(st.unified_b.merged_pairs.size()) +
                      "," + fmt(dal_sum / n);
    if (spr) row += "," + fmt(spr_a / n) + "," + fmt(spr_b / n);
    row += "," + fmt(sn_a / n) + "," + fmt(sn_b / n) + "," +
           fmt(static_cast<double>(rel_a) / static_cast<double>(cnt_a)) + "," +
           fmt(static_cast<double>(rel_b) / static_cast<double>(cnt_b)) + "," + fmt(deviation) + "," + fmt(lr) + "\n";
    logs.stage2 += row;
    log::info("stage 2 epoch " + std::to_string(epoch) + " dal " + fmt(dal_sum / n) + " deviation " + fmt(deviation));
    state.stage2_epochs_done = epoch + 1;
  }
  if (encoder_hash(*state.frozen) != frozen_hash) throw ContractError("frozen snapshot changed during stage 2");
}

TrainState train(const TrainConfig& cfg, const Tensor& data_a, const Tensor& data_b, TrainLogs& logs) {
  TrainState s = init_state(cfg, data_a, data_b);
  run_stage1(s, data_a, data_b, logs);
  run_stage2(s, data_a, data_b, logs);
  return s;
}

std::string encoder_hash(const encoder::EncoderParams& enc) {
  std::string bytes;
  for (const Tensor* p : enc.parameters()) {
    for (std::size_t e : p->shape()) bytes += std::to_string(e) + "x";
    bytes += ";";
    const auto d = p->data();
    bytes.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
  }
  return hashing::sha256_hex(bytes);
}

}  // namespace uem::trainer
