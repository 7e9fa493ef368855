#include "uem/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "uem/clustering.hpp"
#include "uem/error.hpp"
#include "uem/log.hpp"
#include "uem/protostruct.hpp"
#include "uem/stage2.hpp"

namespace uem::retrieval {

namespace dk = diffkit;

double detector_score(std::span<const double> query, const Tensor& prototypes) {
  if (prototypes.size() == 0) throw ContractError("detector has no prototypes");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < prototypes.rows(); ++c) best = std::min(best, stage2::snnm_score(query, prototypes.row(c)));
  return best;
}

bool detect_private(std::span<const double> query, const Tensor& prototypes, double eta) {
  return detector_score(query, prototypes) > eta;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw ConfigError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Detector calibrate_detector(const Tensor& retrieval_features, const Tensor& prototypes, double q) {
  std::vector<double> scores;
  scores.reserve(retrieval_features.rows());
  for (std::size_t i = 0; i < retrieval_features.rows(); ++i)
    scores.push_back(detector_score(retrieval_features.row(i), prototypes));
  return Detector{prototypes, percentile(std::move(scores), q)};
}

std::vector<RankedItem> rank(std::span<const double> query, const Tensor& retrieval_features, DistanceMetric metric) {
  if (retrieval_features.rows() == 0 || retrieval_features.size() == 0) throw DataError("empty retrieval domain");
  std::vector<RankedItem> items(retrieval_features.rows());
  for (std::size_t j = 0; j < items.size(); ++j) {
    const auto row = retrieval_features.row(j);
    items[j].id = j;
    items[j].distance = metric == DistanceMetric::euclidean ? dk::kernels::euclid(query, row)
                                                            : 1.0 - dk::kernels::cosine(query, row);
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const RankedItem& a, const RankedItem& b) { return a.distance < b.distance; });
  return items;
}

RetrievalOutcome retrieve(std::size_t query_id, std::span<const double> query_feature,
                          const Tensor& retrieval_features, std::size_t k, const Detector* detector,
                          DistanceMetric metric) {
  if (k < 1) throw ContractError("retrieve: k must be at least 1");
  RetrievalOutcome out;
  out.query_id = query_id;
  out.detector_score = std::numeric_limits<double>::quiet_NaN();
  if (detector != nullptr) {
    out.detector_score = detector_score(query_feature, detector->prototypes);
    if (out.detector_score > detector->eta) {
      out.is_null = true;
      return out;
    }
  }
  out.ranked = rank(query_feature, retrieval_features, metric);
  out.ranked.resize(std::min(k, out.ranked.size()));
  return out;
}

std::vector<RetrievalOutcome> retrieve_all(const encoder::EncoderParams& enc, const Tensor& queries,
                                           const Tensor& retrieval_rows, std::size_t k, const Detector* detector,
                                           DistanceMetric metric) {
  const Tensor q = encoder::encode(enc, queries);
  const Tensor r = encoder::encode(enc, retrieval_rows);
  std::vector<RetrievalOutcome> out;
  out.reserve(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) out.push_back(retrieve(i, q.row(i), r, k, detector, metric));
  return out;
}

double average_precision(const std::vector<bool>& relevance) {
  std::size_t hits = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < relevance.size(); ++r) {
    if (!relevance[r]) continue;
    ++hits;
    total += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return hits == 0 ? 0.0 : total / static_cast<double>(hits);
}

double map_all(std::span<const RetrievalOutcome> outcomes, std::span<const int> query_labels,
               std::span<const int> retrieval_labels, std::size_t* skipped) {
  const std::set<int> shared(retrieval_labels.begin(), retrieval_labels.end());
  double total = 0.0;
  std::size_t counted = 0, skip = 0;
  std::vector<bool> rel;
  for (const RetrievalOutcome& o : outcomes) {
    const int label = query_labels[o.query_id];
    if (!shared.contains(label)) continue;
    if (o.is_null || o.ranked.size() != retrieval_labels.size()) {
      throw ContractError("map_all needs the full detector-free ranking for every shared-label query");
    }
    rel.assign(o.ranked.size(), false);
    bool any = false;
    for (std::size_t r = 0; r < o.ranked.size(); ++r) {
      rel[r] = retrieval_labels[o.ranked[r].id] == label;
      any = any || rel[r];
    }
    if (!any) {
      log::warn("map_all: query " + std::to_string(o.query_id) + " has no relevant retrieval item; skipped");
      ++skip;
      continue;
    }
    total += average_precision(rel);
    ++counted;
  }
  if (skipped != nullptr) *skipped = skip;
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

std::optional<double> openset_accuracy(std::span<const RetrievalOutcome> outcomes, std::span<const int> query_labels,
                                       std::span<const int> retrieval_labels) {
  const std::set<int> shared(retrieval_labels.begin(), retrieval_labels.end());
  std::size_t priv = 0, flagged = 0;
  for (const RetrievalOutcome& o : outcomes) {
    if (shared.contains(query_labels[o.query_id])) continue;
    ++priv;
    if (o.is_null) ++flagged;
  }
  if (priv == 0) return std::nullopt;
  return static_cast<double>(flagged) / static_cast<double>(priv);
}

Detector build_detector(const Tensor& query_features, const Tensor& retrieval_features, const EvalConfig& cfg) {
  auto fit = [&](const Tensor& x, std::uint64_t salt) {
    auto [lo, hi] = clustering::default_k_range(x.rows());
    if (cfg.k_min != 0) lo = cfg.k_min;
    if (cfg.k_max != 0) hi = std::min(cfg.k_max, x.rows());
    clustering::KMeansOptions opts;
    opts.restarts = cfg.restarts;
    if (lo >= 2 && lo < hi) return clustering::elbow(x, lo, hi, cfg.seed + salt, opts).clustering.centers;
    return clustering::kmeans(x, std::min<std::size_t>(std::max<std::size_t>(lo, 1), x.rows()), cfg.seed + salt, opts)
        .centers;
  };
  const auto protos_q = protostruct::PrototypeSet::from_tensor(fit(query_features, 1), Domain::a);
  const auto protos_r = protostruct::PrototypeSet::from_tensor(fit(retrieval_features, 2), Domain::b);

  auto mean_of = [](const Tensor& x) {
    std::vector<double> m(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t k = 0; k < m.size(); ++k) m[k] += x.at(i, k);
    for (double& v : m) v /= static_cast<double>(x.rows());
    return m;
  };
  const auto translated = protostruct::translate(protos_q, mean_of(query_features), mean_of(retrieval_features), Domain::b);
  const auto unified = protostruct::build_unified(protos_r, translated, cfg.merge);

  std::vector<double> flat;
  std::size_t count = 0;
  for (std::size_t u = 0; u < unified.size(); ++u) {
    if (unified.provenance[u] == protostruct::Provenance::translated) continue;
    flat.insert(flat.end(), unified.prototypes[u].begin(), unified.prototypes[u].end());
    ++count;
  }
  Tensor protos(dk::Shape{count, retrieval_features.cols()}, std::move(flat));
  return calibrate_detector(retrieval_features, protos, cfg.percentile);
}

Evaluation evaluate(const encoder::EncoderParams& enc, const Tensor& queries, std::span<const int> query_labels,
                    const Tensor& retrieval_rows, std::span<const int> retrieval_labels, const EvalConfig& cfg) {
  if (query_labels.size() != queries.rows() || retrieval_labels.size() != retrieval_rows.rows()) {
    throw DataError("evaluation labels do not match dataset sizes");
  }
  const Tensor q = encoder::encode(enc, queries);
  const Tensor r = encoder::encode(enc, retrieval_rows);

  Evaluation ev;
  ev.detector = build_detector(q, r, cfg);

  std::vector<RetrievalOutcome> full;
  full.reserve(q.rows());
  const std::set<int> shared(retrieval_labels.begin(), retrieval_labels.end());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    RetrievalOutcome o = retrieve(i, q.row(i), r, r.rows(), &ev.detector, cfg.metric);
    if (o.is_null) ++ev.metrics.num_null;
    ev.outcomes.push_back(o);
    if (shared.contains(query_labels[i])) {
      full.push_back(retrieve(i, q.row(i), r, r.rows(), nullptr, cfg.metric));
      ++ev.metrics.num_shared;
    } else {
      ++ev.metrics.num_private;
    }
  }
  ev.metrics.num_queries = q.rows();
  if (!full.empty()) ev.metrics.map_all = map_all(full, query_labels, retrieval_labels, &ev.metrics.skipped);
  ev.metrics.openset_accuracy = openset_accuracy(ev.outcomes, query_labels, retrieval_labels);
  return ev;
}

std::string outcomes_csv(std::span<const RetrievalOutcome> outcomes, std::size_t max_ids) {
  std::ostringstream os;
  os.precision(17);
  os << "query_id,is_null,detector_score,ranked_ids\n";
  for (const RetrievalOutcome& o : outcomes) {
    os << o.query_id << ',' << (o.is_null ? 1 : 0) << ',';
    if (!std::isnan(o.detector_score)) os << o.detector_score;
    os << ',';
    const std::size_t n = max_ids == 0 ? o.ranked.size() : std::min(max_ids, o.ranked.size());
    for (std::size_t r = 0; r < n; ++r) {
      if (r) os << ' ';
      os << o.ranked[r].id;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace uem::retrieval
