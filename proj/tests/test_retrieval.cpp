#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "uem/error.hpp"
#include "uem/retrieval.hpp"

using namespace uem;
using namespace uem::diffkit;
using doctest::Approx;

namespace {

encoder::EncoderParams identity(std::size_t d) {
  encoder::EncoderParams e;
  encoder::Layer l;
  l.weight = Tensor(Shape{d, d});
  for (std::size_t i = 0; i < d; ++i) l.weight.at(i, i) = 1.0;
  l.bias = Tensor(Shape{d});
  e.layers.push_back(l);
  return e;
}

std::vector<retrieval::RetrievalOutcome> full_rankings(const Tensor& q, const Tensor& r) {
  std::vector<retrieval::RetrievalOutcome> out;
  for (std::size_t i = 0; i < q.rows(); ++i) out.push_back(retrieval::retrieve(i, q.row(i), r, r.rows(), nullptr));
  return out;
}

}  // namespace

TEST_CASE("average precision examples") {
  CHECK(retrieval::average_precision({true, false, true}) == Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(retrieval::average_precision({true, true, false, false}) == 1.0);
  CHECK(retrieval::average_precision({false, false, false, false, true}) == Approx(0.2).epsilon(1e-15));
  Rng rng(1);
  for (int s = 0; s < 200; ++s) {
    std::vector<bool> rel(1 + rng.index(30));
    for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = rng.uniform() < 0.3;
    rel[rng.index(rel.size())] = true;
    CHECK(std::abs(retrieval::average_precision(rel) - oracle::ap(rel)) <= 1e-12);
  }
}

TEST_CASE("ranking and verdicts") {
  const Tensor r = Tensor::matrix(3, 1, {2, 1, 3});
  const double q[] = {0};
  const auto out = retrieval::retrieve(0, q, r, 2, nullptr);
  REQUIRE(out.ranked.size() == 2);
  CHECK(out.ranked[0].id == 1);
  CHECK(out.ranked[1].id == 0);

  const Tensor items = Tensor::matrix(3, 2, {1, 1, 4, 5, -2, 3});
  const double exact[] = {4, 5};
  CHECK(retrieval::rank(exact, items).front().id == 1);
  CHECK(retrieval::rank(exact, items).front().distance == 0.0);

  // detector flags the query: null verdict
  retrieval::Detector det{Tensor::matrix(1, 2, {1, 0}), 0.1};
  const double far[] = {0, 50};
  const auto nul = retrieval::retrieve(3, far, items, 2, &det);
  CHECK(nul.is_null);
  CHECK(nul.ranked.empty());
  const double on[] = {2, 0};
  CHECK_FALSE(retrieval::detect_private(on, det.prototypes, det.eta));
  CHECK(retrieval::detector_score(on, det.prototypes) == 0.0);
  CHECK(retrieval::detect_private(far, det.prototypes, det.eta));
}

TEST_CASE("percentile and detector calibration") {
  CHECK(retrieval::percentile({3, 1, 2}, 50) == 2.0);
  CHECK(retrieval::percentile({1, 2}, 25) == 1.25);
  CHECK_THROWS_AS(retrieval::percentile({}, 50), ContractError);
  Rng rng(6);
  std::vector<double> v(21);
  for (double& x : v) x = rng.normal();
  std::vector<double> sorted = v;
  std::nth_element(sorted.begin(), sorted.begin() + 19, sorted.end());
  CHECK(retrieval::percentile(v, 95) == sorted[19]);

  const Tensor feats = test::random_matrix(rng, 40, 3, 2.0), protos = test::random_matrix(rng, 4, 3, 2.0);
  const auto det = retrieval::calibrate_detector(feats, protos, 95);
  std::vector<double> scores;
  for (std::size_t i = 0; i < 40; ++i) {
    const oracle::Vec f(feats.row(i).begin(), feats.row(i).end());
    double best = 1e300;
    for (const auto& p : test::to_mat(protos)) best = std::min(best, oracle::snnm_score(f, p));
    scores.push_back(best);
  }
  CHECK(det.eta == Approx(oracle::percentile(scores, 95)).epsilon(1e-12));
}

TEST_CASE("mAP@All matches the brute-force oracle on 100 fixtures") {
  Rng rng(13);
  for (int s = 0; s < 100; ++s) {
    const std::size_t nq = 1 + rng.index(20), nr = 1 + rng.index(50), d = 1 + rng.index(4);
    const Tensor q = test::random_matrix(rng, nq, d), r = test::random_matrix(rng, nr, d);
    std::vector<int> ql(nq), rl(nr);
    for (int& x : ql) x = static_cast<int>(rng.index(4));
    for (int& x : rl) x = static_cast<int>(rng.index(3));
    const auto outs = full_rankings(q, r);
    std::size_t skipped = 0;
    const double m = retrieval::map_all(outs, ql, rl, &skipped);
    CHECK(std::abs(m - oracle::map_all(test::to_mat(q), ql, test::to_mat(r), rl)) <= 1e-12);
  }
}

TEST_CASE("retrieval is invariant to storage order") {
  Rng rng(17);
  for (int s = 0; s < 20; ++s) {
    const Tensor r = test::random_matrix(rng, 15, 3);
    const Tensor q = test::random_vector(rng, 3);
    std::vector<std::size_t> perm = test::iota_ids(15);
    rng.shuffle(perm);
    const Tensor rp = gather_rows(r, perm);
    const auto a = retrieval::rank(q.data(), r);
    const auto b = retrieval::rank(q.data(), rp);
    for (std::size_t i = 0; i < 15; ++i) {
      CHECK(perm[b[i].id] == a[i].id);
      CHECK(b[i].distance == a[i].distance);
    }
  }
}

TEST_CASE("raising eta never turns a null verdict into a ranked one") {
  Rng rng(23);
  const Tensor protos = test::random_matrix(rng, 3, 4), items = test::random_matrix(rng, 10, 4);
  for (int s = 0; s < 100; ++s) {
    const Tensor q = test::random_vector(rng, 4, 3.0);
    bool was_null = true;
    for (double eta : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 1e9}) {
      retrieval::Detector det{protos, eta};
      const bool n = retrieval::retrieve(0, q.data(), items, 3, &det).is_null;
      if (!was_null) CHECK_FALSE(n);
      was_null = n;
    }
  }
}

TEST_CASE("open-set accuracy and evaluation") {
  std::vector<retrieval::RetrievalOutcome> outs(4);
  outs[0].is_null = true;
  outs[1].is_null = true;
  const std::vector<int> ql{5, 5, 5, 5}, rl{0, 1};
  CHECK(retrieval::openset_accuracy(outs, ql, rl).value() == 0.5);
  for (auto& o : outs) o.is_null = true;
  CHECK(retrieval::openset_accuracy(outs, ql, rl).value() == 1.0);
  for (auto& o : outs) o.is_null = false;
  CHECK(retrieval::openset_accuracy(outs, ql, rl).value() == 0.0);
  const std::vector<int> shared{0, 0, 1, 1};
  CHECK_FALSE(retrieval::openset_accuracy(outs, shared, rl).has_value());

  // two well separated shared classes plus one far private class
  Rng rng(3);
  Tensor qa(Shape{30, 2}), rb(Shape{20, 2});
  std::vector<int> qlab, rlab;
  for (std::size_t i = 0; i < 30; ++i) {
    const int c = static_cast<int>(i % 3);
    const double cx = c == 0 ? 10 : c == 1 ? -10 : 0, cy = c == 2 ? 80 : 0;
    qa.at(i, 0) = cx + 0.3 * rng.normal();
    qa.at(i, 1) = cy + 0.3 * rng.normal();
    qlab.push_back(c);
  }
  for (std::size_t i = 0; i < 20; ++i) {
    const int c = static_cast<int>(i % 2);
    rb.at(i, 0) = (c == 0 ? 10 : -10) + 0.3 * rng.normal();
    rb.at(i, 1) = 0.3 * rng.normal();
    rlab.push_back(c);
  }
  retrieval::EvalConfig cfg;
  const auto ev = retrieval::evaluate(identity(2), qa, qlab, rb, rlab, cfg);
  CHECK(ev.metrics.num_queries == 30);
  CHECK(ev.metrics.num_private == 10);
  CHECK(ev.metrics.num_shared == 20);
  CHECK(ev.metrics.map_all.value() == Approx(1.0).epsilon(1e-12));
  CHECK(ev.metrics.openset_accuracy.value() == 1.0);
  for (const auto& o : ev.outcomes)
    if (o.is_null) CHECK(o.detector_score > ev.detector.eta);

  const std::string csv = retrieval::outcomes_csv(ev.outcomes, 3);
  CHECK(csv.rfind("query_id,is_null,detector_score,ranked_ids\n", 0) == 0);
}
