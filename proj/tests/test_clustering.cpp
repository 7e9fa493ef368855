#include <cmath>
#include <limits>

#include "doctest.h"
#include "fixtures.hpp"
#include "uem/clustering.hpp"
#include "uem/error.hpp"
#include "uem/protostruct.hpp"

using namespace uem;
using namespace uem::diffkit;
using doctest::Approx;

namespace {

Tensor blobs(Rng& rng, const std::vector<std::vector<double>>& centers, std::size_t per, double sigma) {
  const std::size_t d = centers[0].size();
  Tensor t(Shape{centers.size() * per, d});
  std::size_t r = 0;
  for (const auto& c : centers)
    for (std::size_t i = 0; i < per; ++i, ++r)
      for (std::size_t k = 0; k < d; ++k) t.at(r, k) = c[k] + sigma * rng.normal();
  return t;
}

// Every accepted merge re-verified by brute force, plus maximality of the pass.
void verify_merge(const protostruct::PrototypeSet& own, const protostruct::PrototypeSet& tr,
                  const protostruct::UnifiedStructure& u) {
  const double thr = std::min(oracle::min_pairwise(own.points), oracle::min_pairwise(tr.points));
  CHECK(u.threshold == thr);
  std::vector<int> own_used(own.size(), 0), tr_used(tr.size(), 0);
  double last = -1.0;
  for (auto [a, b] : u.merged_pairs) {
    const double d = oracle::dist(own.points[a], tr.points[b]);
    CHECK(d < thr);
    CHECK(d >= last);
    last = d;
    for (std::size_t a2 = 0; a2 < own.size(); ++a2) CHECK(oracle::dist(own.points[a2], tr.points[b]) >= d);
    ++own_used[a];
    ++tr_used[b];
  }
  for (int x : own_used) CHECK(x <= 1);
  for (int x : tr_used) CHECK(x <= 1);
  // an unmerged translated prototype under the threshold lost its target to a closer proposal
  for (std::size_t b = 0; b < tr.size(); ++b) {
    if (tr_used[b]) continue;
    std::size_t best = 0;
    for (std::size_t a = 1; a < own.size(); ++a)
      if (oracle::dist(own.points[a], tr.points[b]) < oracle::dist(own.points[best], tr.points[b])) best = a;
    if (own.empty() || !(oracle::dist(own.points[best], tr.points[b]) < thr)) continue;
    CHECK(own_used[best] == 1);
  }
  CHECK(u.size() == own.size() + tr.size() - u.merged_pairs.size());
  for (std::size_t a = 0; a < own.size(); ++a) {
    const auto& p = u.prototypes[u.own_to_unified[a]];
    if (own_used[a]) {
      CHECK(u.provenance[u.own_to_unified[a]] == protostruct::Provenance::merged);
    } else {
      CHECK(p == own.points[a]);
      CHECK(u.provenance[u.own_to_unified[a]] == protostruct::Provenance::own);
    }
  }
  for (auto [a, b] : u.merged_pairs) {
    CHECK(u.other_to_unified[b] == u.own_to_unified[a]);
    for (std::size_t k = 0; k < own.points[a].size(); ++k)
      CHECK(u.prototypes[u.own_to_unified[a]][k] == Approx((own.points[a][k] + tr.points[b][k]) / 2).epsilon(1e-12));
  }
  for (std::size_t b = 0; b < tr.size(); ++b)
    if (!tr_used[b]) CHECK(u.prototypes[u.other_to_unified[b]] == tr.points[b]);
}

}  // namespace

TEST_CASE("kmeans on the four-point fixture reaches the exhaustive optimum") {
  const Tensor x = Tensor::matrix(4, 1, {0, 0.1, 10, 10.1});
  const double opt = oracle::exhaustive_wcss_1d({0, 0.1, 10, 10.1}, 2);
  CHECK(opt == Approx(0.01).epsilon(1e-12));
  const auto c = clustering::kmeans(x, 2, 1);
  CHECK(std::abs(c.wcss - opt) <= 1e-9);
  std::vector<double> centers{c.centers.at(0, 0), c.centers.at(1, 0)};
  std::sort(centers.begin(), centers.end());
  CHECK(centers[0] == Approx(0.05).epsilon(1e-12));
  CHECK(centers[1] == Approx(10.05).epsilon(1e-12));
}

TEST_CASE("kmeans degenerate cases and invariants") {
  Rng rng(2);
  const Tensor x = test::random_matrix(rng, 6, 3);
  const auto full = clustering::kmeans(x, 6, 3);
  CHECK(full.wcss == Approx(0.0).epsilon(1e-12));

  Tensor dup(Shape{10, 2});
  for (std::size_t i = 0; i < 10; ++i) {
    dup.at(i, 0) = i < 5 ? 1.0 : 3.0;
    dup.at(i, 1) = i < 5 ? -2.0 : 4.0;
  }
  const auto one = clustering::kmeans(dup, 1, 0);
  CHECK(one.centers.at(0, 0) == Approx(2.0).epsilon(1e-12));
  CHECK(one.centers.at(0, 1) == Approx(1.0).epsilon(1e-12));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor p = test::random_matrix(rng, 40, 3);
    const auto c = clustering::kmeans(p, 4, seed);
    CHECK(c.assignments.size() == 40);
    for (std::size_t i = 0; i < 40; ++i) CHECK(c.assignments[i] == clustering::nearest_center(p.row(i), c.centers));
    CHECK(c.wcss == Approx(clustering::wcss(p, c.centers, c.assignments)).epsilon(1e-12));
    const auto again = clustering::kmeans(p, 4, seed);
    CHECK(again.centers == c.centers);
  }
  CHECK_THROWS(clustering::kmeans(x, 0, 0));
  CHECK_THROWS(clustering::kmeans(x, 7, 0));
}

TEST_CASE("kmeans matches the exhaustive optimum on small 1-D sets") {
  Rng rng(31);
  for (int s = 0; s < 20; ++s) {
    std::vector<double> v(7);
    for (double& x : v) x = rng.normal() * 5;
    Tensor t(Shape{7, 1});
    for (std::size_t i = 0; i < 7; ++i) t.at(i, 0) = v[i];
    for (std::size_t k : {2, 3}) {
      clustering::KMeansOptions opts;
      opts.restarts = 16;
      CHECK(clustering::kmeans(t, k, s, opts).wcss == Approx(oracle::exhaustive_wcss_1d(v, k)).epsilon(1e-9));
    }
  }
}

TEST_CASE("elbow recovers blob counts") {
  Rng rng(5);
  const Tensor three = blobs(rng, {{0}, {10}, {20}}, 30, 0.1);
  CHECK(clustering::estimate_k_elbow(three, 2, 8, 1) == 3);

  Tensor same(Shape{20, 2}, 1.5);
  CHECK(clustering::estimate_k_elbow(same, 2, 6, 1) == 2);

  const auto fit = clustering::elbow(three, 2, 8, 1);
  CHECK(fit.wcss.size() == 7);
  CHECK(fit.k_min == 2);
  CHECK(fit.clustering.k() == 3);
  for (std::size_t i = 1; i < fit.wcss.size(); ++i) CHECK(fit.wcss[i] <= fit.wcss[i - 1] + 1e-9);

  CHECK(clustering::default_k_range(500) == std::pair<std::size_t, std::size_t>{2, 20});
  CHECK(clustering::default_k_range(60) == std::pair<std::size_t, std::size_t>{2, 6});
  CHECK(clustering::default_k_range(5) == std::pair<std::size_t, std::size_t>{2, 3});
}

TEST_CASE("translate and pairwise distances") {
  protostruct::PrototypeSet p;
  p.points = {{6, 6}};
  const double ms[] = {5, 5}, md[] = {1, 1};
  const auto t = protostruct::translate(p, ms, md, Domain::b);
  CHECK(t.points[0] == std::vector<double>{2, 2});
  CHECK(t.domain == Domain::b);
  CHECK(protostruct::translate(p, ms, ms, Domain::b).points == p.points);

  Rng rng(1);
  protostruct::PrototypeSet q = protostruct::PrototypeSet::from_tensor(test::random_matrix(rng, 5, 3), Domain::a);
  const std::vector<double> a{0.3, -1, 2}, b{4, 4, 4};
  const auto back = protostruct::translate(protostruct::translate(q, a, b, Domain::b), b, a, Domain::a);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(back.points[i][k] - q.points[i][k]) <= 1e-12);

  const std::vector<protostruct::Point> tri{{0, 0}, {3, 4}};
  CHECK(protostruct::min_pairwise_distance(tri) == 5.0);
  const std::vector<protostruct::Point> single{{1, 1}};
  CHECK(protostruct::min_pairwise_distance(single) == std::numeric_limits<double>::infinity());
  const std::vector<protostruct::Point> line{{0}, {1}, {3}};
  CHECK(protostruct::min_pairwise_distance(line) == 1.0);
}

TEST_CASE("merging examples") {
  protostruct::PrototypeSet own, tr;
  own.points = {{0, 0}, {10, 0}};
  tr.points = {{0.2, 0}, {20, 0}};
  tr.domain = Domain::b;
  const auto u = protostruct::build_unified(own, tr);
  CHECK(u.threshold == 10.0);
  REQUIRE(u.size() == 3);
  CHECK(u.prototypes[0][0] == Approx(0.1).epsilon(1e-12));
  CHECK(u.prototypes[1] == std::vector<double>{10, 0});
  CHECK(u.prototypes[2] == std::vector<double>{20, 0});
  CHECK(u.merged_pairs.size() == 1);
  CHECK(u.unified_id(Domain::b, 1) == 2);
  CHECK(u.unified_id(Domain::a, 0) == 0);
  CHECK_THROWS_AS(u.unified_id(Domain::b, 9), ContractError);
  verify_merge(own, tr, u);

  const auto plain = protostruct::build_unified(own, tr, false);
  CHECK(plain.size() == 4);
  CHECK(plain.merged_pairs.empty());

  protostruct::PrototypeSet far;
  far.points = {{100, 100}, {200, 100}};
  const auto disjoint = protostruct::build_unified(own, far);
  CHECK(disjoint.size() == 4);
  CHECK(disjoint.merged_pairs.empty());

  const auto twins = protostruct::build_unified(own, own);
  CHECK(twins.size() == 2);
  CHECK(twins.merged_pairs.size() == 2);
  CHECK(protostruct::structure_csv(u).rfind("unified_id,provenance,own_id,other_id,p0,p1\n", 0) == 0);
}

TEST_CASE("merging agrees with brute-force verification on 100 random pairs") {
  Rng rng(99);
  for (int s = 0; s < 100; ++s) {
    const std::size_t na = 1 + rng.index(6), nb = 1 + rng.index(6), d = 1 + rng.index(3);
    const auto own = protostruct::PrototypeSet::from_tensor(test::random_matrix(rng, na, d, 2.0), Domain::a);
    const auto tr = protostruct::PrototypeSet::from_tensor(test::random_matrix(rng, nb, d, 2.0), Domain::b);
    verify_merge(own, tr, protostruct::build_unified(own, tr));
  }
}
