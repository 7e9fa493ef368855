#include "uem/protostruct.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "uem/error.hpp"

namespace uem::protostruct {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

std::size_t dim_of(const PrototypeSet& a, const PrototypeSet& b) {
  const std::size_t d = a.empty() ? b.points.front().size() : a.points.front().size();
  for (const auto* set : {&a, &b})
    for (const Point& p : set->points)
      if (p.size() != d) throw ShapeError("prototype dimension mismatch: " + std::to_string(p.size()) + " vs " + std::to_string(d));
  return d;
}

}  // namespace

PrototypeSet PrototypeSet::from_tensor(const diffkit::Tensor& centers, Domain domain) {
  PrototypeSet out;
  out.domain = domain;
  for (std::size_t r = 0; r < centers.rows(); ++r) out.points.emplace_back(centers.row(r).begin(), centers.row(r).end());
  return out;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::own:
      return "own";
    case Provenance::translated:
      return "translated";
    case Provenance::merged:
      return "merged";
  }
  return "?";
}

std::size_t UnifiedStructure::unified_id(Domain source, std::size_t pre_merge_id) const {
  const auto& table = source == domain ? own_to_unified : other_to_unified;
  if (pre_merge_id >= table.size()) {
    throw ContractError("structure for domain " + std::string(uem::to_string(domain)) + " has no entry for " +
                        std::string(uem::to_string(source)) + " prototype " + std::to_string(pre_merge_id) +
                        " (stale structure?)");
  }
  return table[pre_merge_id];
}

diffkit::Tensor UnifiedStructure::to_tensor() const {
  if (prototypes.empty()) throw ContractError("unified structure is empty");
  const std::size_t d = prototypes.front().size();
  diffkit::Tensor t(diffkit::Shape{prototypes.size(), d});
  for (std::size_t i = 0; i < prototypes.size(); ++i) std::copy(prototypes[i].begin(), prototypes[i].end(), t.row(i).begin());
  return t;
}

PrototypeSet translate(const PrototypeSet& src, std::span<const double> mean_src, std::span<const double> mean_dst,
                       Domain dst) {
  if (mean_src.size() != mean_dst.size()) throw ShapeError("translate: mean dimension mismatch");
  PrototypeSet out;
  out.domain = dst;
  for (const Point& p : src.points) {
    if (p.size() != mean_src.size()) throw ShapeError("translate: prototype dimension mismatch");
    Point q(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) q[k] = p[k] + (mean_dst[k] - mean_src[k]);
    out.points.push_back(std::move(q));
  }
  return out;
}

double min_pairwise_distance(std::span<const Point> prototypes) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < prototypes.size(); ++i)
    for (std::size_t j = i + 1; j < prototypes.size(); ++j)
      best = std::min(best, diffkit::kernels::euclid(prototypes[i], prototypes[j]));
  return best;
}

UnifiedStructure build_unified(const PrototypeSet& own, const PrototypeSet& translated, bool merge) {
  if (own.empty() && translated.empty()) throw ContractError("build_unified: both prototype sets are empty");
  dim_of(own, translated);

  UnifiedStructure s;
  s.domain = own.domain;
  s.threshold = std::min(min_pairwise_distance(own.points), min_pairwise_distance(translated.points));

  std::vector<std::size_t> partner_of_own(own.size(), kNone);
  std::vector<std::size_t> partner_of_other(translated.size(), kNone);

  if (merge && !own.empty() && !translated.empty()) {
    struct Proposal {
      double dist;
      std::size_t other;
      std::size_t own;
    };
    std::vector<Proposal> proposals;
    for (std::size_t b = 0; b < translated.size(); ++b) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < own.size(); ++a) {
        const double d = diffkit::kernels::euclid(translated.points[b], own.points[a]);
        if (d < best_d) {
          best_d = d;
          best = a;
        }
      }
      proposals.push_back({best_d, b, best});
    }
    std::stable_sort(proposals.begin(), proposals.end(),
                     [](const Proposal& x, const Proposal& y) { return x.dist < y.dist; });
    for (const Proposal& p : proposals) {
      if (!(p.dist < s.threshold)) break;
      if (partner_of_own[p.own] != kNone || partner_of_other[p.other] != kNone) continue;
      partner_of_own[p.own] = p.other;
      partner_of_other[p.other] = p.own;
      s.merged_pairs.emplace_back(p.own, p.other);
    }
  }

  s.own_to_unified.resize(own.size());
  for (std::size_t a = 0; a < own.size(); ++a) {
    s.own_to_unified[a] = s.prototypes.size();
    if (partner_of_own[a] == kNone) {
      s.prototypes.push_back(own.points[a]);
      s.provenance.push_back(Provenance::own);
    } else {
      const Point& q = translated.points[partner_of_own[a]];
      Point m(q.size());
      for (std::size_t k = 0; k < m.size(); ++k) m[k] = (own.points[a][k] + q[k]) / 2.0;
      s.prototypes.push_back(std::move(m));
      s.provenance.push_back(Provenance::merged);
    }
  }
  s.other_to_unified.resize(translated.size());
  for (std::size_t b = 0; b < translated.size(); ++b) {
    if (partner_of_other[b] != kNone) {
      s.other_to_unified[b] = s.own_to_unified[partner_of_other[b]];
      continue;
    }
    s.other_to_unified[b] = s.prototypes.size();
    s.prototypes.push_back(translated.points[b]);
    s.provenance.push_back(Provenance::translated);
  }
  return s;
}

std::string structure_csv(const UnifiedStructure& s) {
  std::ostringstream os;
  os.precision(17);
  const std::size_t d = s.prototypes.empty() ? 0 : s.prototypes.front().size();
  os << "unified_id,provenance,own_id,other_id";
  for (std::size_t k = 0; k < d; ++k) os << ",p" << k;
  os << '\n';
  for (std::size_t u = 0; u < s.size(); ++u) {
    std::string own_id, other_id;
    for (std::size_t a = 0; a < s.own_to_unified.size(); ++a)
      if (s.own_to_unified[a] == u) own_id = std::to_string(a);
    for (std::size_t b = 0; b < s.other_to_unified.size(); ++b)
      if (s.other_to_unified[b] == u) other_id = std::to_string(b);
    os << u << ',' << to_string(s.provenance[u]) << ',' << own_id << ',' << other_id;
    for (double x : s.prototypes[u]) os << ',' << x;
    os << '\n';
  }
  return os.str();
}

}  // namespace uem::protostruct
