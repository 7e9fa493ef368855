#pragma once

// Independent reference computations. Plain loops over std::vector, no use of
// the library's kernels, so they can check the library against itself.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace uem::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

inline double cos_sim(const Vec& a, const Vec& b) { return dot(a, b) / (norm(a) * norm(b)); }

inline double sim(const Vec& a, const Vec& b, double tau) { return cos_sim(a, b) / tau; }

inline double logsumexp(const Vec& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Precision at every relevant position, by counting.
inline double ap(const std::vector<bool>& rel) {
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < rel.size(); ++r) {
    if (!rel[r]) continue;
    std::size_t upto = 0;
    for (std::size_t j = 0; j <= r; ++j) upto += rel[j] ? 1 : 0;
    total += static_cast<double>(upto) / static_cast<double>(r + 1);
    ++hits;
  }
  return hits == 0 ? 0.0 : total / static_cast<double>(hits);
}

// Rank-free mAP: the position of item j is the number of items that precede or
// equal it under (distance, id).
inline double map_all(const Mat& queries, const std::vector<int>& ql, const Mat& items, const std::vector<int>& rl) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::vector<double> d(items.size());
    for (std::size_t j = 0; j < items.size(); ++j) d[j] = dist(queries[q], items[j]);
    auto before = [&](std::size_t x, std::size_t y) { return d[x] < d[y] || (d[x] == d[y] && x <= y); };
    double total = 0.0;
    std::size_t rel = 0;
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (rl[j] != ql[q]) continue;
      std::size_t pos = 0, rel_upto = 0;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (!before(i, j)) continue;
        ++pos;
        if (rl[i] == ql[q]) ++rel_upto;
      }
      total += static_cast<double>(rel_upto) / static_cast<double>(pos);
      ++rel;
    }
    if (rel == 0) continue;
    sum += total / static_cast<double>(rel);
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

// Best wcss over every assignment of points (1-D) to exactly k nonempty groups.
inline double exhaustive_wcss_1d(const Vec& x, std::size_t k) {
  const std::size_t n = x.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= k;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t code = 0; code < combos; ++code) {
    std::vector<std::size_t> g(n);
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = c % k;
      c /= k;
    }
    double w = 0.0;
    bool empty = false;
    for (std::size_t grp = 0; grp < k; ++grp) {
      double s = 0.0;
      std::size_t m = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (g[i] == grp) s += x[i], ++m;
      if (m == 0) {
        empty = true;
        break;
      }
      const double mean = s / static_cast<double>(m);
      for (std::size_t i = 0; i < n; ++i)
        if (g[i] == grp) w += (x[i] - mean) * (x[i] - mean);
    }
    if (!empty) best = std::min(best, w);
  }
  return best;
}

inline double min_pairwise(const Mat& p) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (i != j) m = std::min(m, dist(p[i], p[j]));
  return m;
}

// sum_i -log softmax_j(<f_i, m_j>/tau)[i]
inline double ince(const Mat& f, const Mat& m, double tau) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    Vec logits;
    for (const Vec& mj : m) logits.push_back(sim(f[i], mj, tau));
    s += logsumexp(logits) - logits[i];
  }
  return s;
}

inline double pnce(const Mat& f, const Mat& p, const std::vector<std::size_t>& c, double tau) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    Vec logits;
    for (const Vec& pc : p) logits.push_back(sim(f[i], pc, tau));
    s += logsumexp(logits) - logits[c[i]];
  }
  return s;
}

inline double sel(const Mat& f, const Mat& p, double tau) {
  double s = 0.0;
  for (const Vec& fi : f) {
    Vec logits;
    for (const Vec& pc : p) logits.push_back(sim(fi, pc, tau));
    const double lse = logsumexp(logits);
    for (std::size_t c = 0; c < p.size(); ++c) s += std::exp(logits[c] - lse) * dist(fi, p[c]);
  }
  return s / static_cast<double>(f.size());
}

inline double alpha(double e, double E) { return 1.0 / (1.0 + std::exp(0.5 * E - e)); }

inline double bce(const Vec& g, const std::vector<int>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double p = std::clamp(g[i], 1e-7, 1.0 - 1e-7);
    s += y[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return s;
}

inline double spr(const Mat& cur, const Mat& frozen) {
  const double b = static_cast<double>(cur.size());
  double s = 0.0;
  for (std::size_t i = 0; i < cur.size(); ++i)
    for (std::size_t j = 0; j < cur.size(); ++j) {
      const double dc = cos_sim(cur[i], cur[j]) - cos_sim(frozen[i], frozen[j]);
      const double dd = dist(cur[i], cur[j]) - dist(frozen[i], frozen[j]);
      s += dc * dc + dd * dd;
    }
  return s / (b * b);
}

inline double snnm_score(const Vec& q, const Vec& c) { return (1.0 - cos_sim(q, c)) * dist(q, c); }

// Exhaustive argmin with (score, distance, id) ordering.
inline std::size_t snnm_argmin(const Vec& q, const Mat& cands) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < cands.size(); ++j) {
    const double sj = snnm_score(q, cands[j]), sb = snnm_score(q, cands[best]);
    if (sj < sb || (sj == sb && dist(q, cands[j]) < dist(q, cands[best]))) best = j;
  }
  return best;
}

// (1/B) sum_i -log [Delta_i / denominator_i]
inline double snnm_loss(const Mat& f, const Mat& protos, const Mat& bank, const std::vector<std::size_t>& target,
                        const std::vector<std::size_t>& matched, const std::vector<bool>& reliable, double tau) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double denom = 0.0;
    for (const Vec& p : protos) denom += std::exp(sim(f[i], p, tau));
    for (const Vec& m : bank) denom += std::exp(sim(f[i], m, tau));
    double num = std::exp(sim(f[i], protos[target[i]], tau));
    if (reliable[i]) num += std::exp(sim(f[i], bank[matched[i]], tau));
    s += -std::log(num / denom);
  }
  return s / static_cast<double>(f.size());
}

// Linear-interpolated percentile via sorted copy.
inline double percentile(Vec v, double q) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace uem::oracle
