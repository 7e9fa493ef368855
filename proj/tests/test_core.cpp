#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "uem/encoder.hpp"
#include "uem/error.hpp"
#include "uem/membank.hpp"
#include "uem/rng.hpp"
#include "uem/textio.hpp"

using namespace uem;
using namespace uem::diffkit;
using doctest::Approx;

TEST_CASE("rng streams are deterministic and independent") {
  Rng a = Rng::stream(7, "init"), b = Rng::stream(7, "init"), c = Rng::stream(7, "shuffle");
  const auto x = a.next_u64();
  CHECK(x == b.next_u64());
  CHECK(x != c.next_u64());
  Rng r(3);
  double mean = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    mean += z;
    sq += z * z;
  }
  mean /= n;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.index(5) < 5);
  }
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  r.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("number text round trip") {
  Rng r(4);
  for (int i = 0; i < 200; ++i) {
    const double x = r.normal() * std::pow(10.0, r.uniform(-8, 8));
    CHECK(textio::parse_double(textio::format_double(x)).value() == x);
  }
  CHECK(textio::parse_double(" 1.5\r").value() == 1.5);
  CHECK_FALSE(textio::parse_double("1.5x").has_value());
  CHECK_FALSE(textio::parse_double("").has_value());
  CHECK(textio::parse_int("42").value() == 42);
  CHECK_FALSE(textio::parse_int("4.2").has_value());
}

TEST_CASE("activation and affine examples") {
  Tape t;
  CHECK(relu(t.constant(Tensor::vector({-1, 2}))).value() == Tensor::vector({0, 2}));

  // fixed 2-layer encoder against a hand-rolled matrix product
  Rng rng(11);
  const std::size_t hidden[] = {4};
  const auto enc = encoder::make_encoder(3, hidden, 2, rng);
  const Tensor x = test::random_matrix(rng, 5, 3);
  const Tensor y = encoder::encode(enc, x);
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> h(4);
    for (std::size_t j = 0; j < 4; ++j) {
      double s = enc.layers[0].bias[j];
      for (std::size_t k = 0; k < 3; ++k) s += x.at(i, k) * enc.layers[0].weight.at(k, j);
      h[j] = std::max(0.0, s);
    }
    for (std::size_t j = 0; j < 2; ++j) {
      double s = enc.layers[1].bias[j];
      for (std::size_t k = 0; k < 4; ++k) s += h[k] * enc.layers[1].weight.at(k, j);
      CHECK(y.at(i, j) == Approx(s).epsilon(1e-12));
    }
  }
  // tape forward agrees with the tape-free one
  Tape tape;
  const auto bound = encoder::bind(tape, enc);
  CHECK(encoder::encode(enc, bound, tape.constant(x)).value() == y);
}

TEST_CASE("initializers") {
  Rng rng(1);
  const std::size_t none[] = {0};
  const auto lin = encoder::make_encoder(16, std::span<const std::size_t>(none, 0), 32, rng, encoder::Init::orthogonal);
  REQUIRE(lin.layers.size() == 1);
  // 16 x 32 with orthonormal rows
  const Tensor& w = lin.layers[0].weight;
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = 0; b < 16; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < 32; ++k) s += w.at(a, k) * w.at(b, k);
      CHECK(s == Approx(a == b ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
    }
  const auto he = encoder::make_encoder(8, std::span<const std::size_t>(none, 0), 4, rng, encoder::Init::he_uniform);
  const double bound = std::sqrt(6.0 / 8.0);
  for (double v : he.layers[0].weight.data()) CHECK(std::abs(v) <= bound);
  for (double v : he.layers[0].bias.data()) CHECK(v == 0.0);
  CHECK(encoder::parse_init("orthogonal") == encoder::Init::orthogonal);
  CHECK_THROWS_AS(encoder::parse_init("xavier"), ConfigError);
}

TEST_CASE("domain classifier examples") {
  Rng rng(2);
  auto cls = encoder::make_classifier(3, 4, rng);
  for (Tensor* p : cls.parameters())
    for (double& x : p->data()) x = 0.0;
  const double f[] = {1, -2, 3};
  CHECK(encoder::classify_domain(cls, f) == 0.5);
  cls.output.bias[0] = 20.0;
  CHECK(encoder::classify_domain(cls, f) == Approx(1.0 / (1.0 + std::exp(-20.0))).epsilon(1e-15));
  CHECK(encoder::classify_domain(cls, f) == Approx(0.999999998).epsilon(1e-9));
}

TEST_CASE("momentum SGD recurrence") {
  Tensor p = Tensor::vector({1.0});
  Tensor* params[] = {&p};
  std::vector<Tensor> vel;
  const Tensor g[] = {Tensor::vector({1.0})};
  encoder::sgd_apply(params, g, vel, 0.9, 0.1, "test");
  CHECK(p[0] == Approx(0.9).epsilon(1e-15));
  CHECK(vel[0][0] == 1.0);
  encoder::sgd_apply(params, g, vel, 0.9, 0.1, "test");
  CHECK(vel[0][0] == Approx(1.9).epsilon(1e-15));
  CHECK(p[0] == Approx(0.71).epsilon(1e-15));

  Tensor q = Tensor::vector({2.0});
  Tensor* qp[] = {&q};
  std::vector<Tensor> qv;
  const Tensor zero[] = {Tensor::vector({0.0})};
  for (int i = 0; i < 5; ++i) encoder::sgd_apply(qp, zero, qv, 0.9, 0.1, "test");
  CHECK(q[0] == 2.0);

  const Tensor bad[] = {Tensor::vector({std::nan("")})};
  try {
    encoder::sgd_apply(qp, bad, qv, 0.9, 0.1, "L_DAL");
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("L_DAL") != std::string::npos);
  }
}

TEST_CASE("cosine learning rate") {
  CHECK(encoder::cosine_lr(0, 100, 2e-4) == 2e-4);
  CHECK(encoder::cosine_lr(100, 100, 2e-4) == 0.0);
  CHECK(encoder::cosine_lr(50, 100, 2e-4) == Approx(1e-4).epsilon(1e-12));
  CHECK(encoder::cosine_lr(5, 0, 2e-4) == 2e-4);
  for (std::size_t t = 0; t < 100; ++t) CHECK(encoder::cosine_lr(t + 1, 100, 1.0) <= encoder::cosine_lr(t, 100, 1.0));

  encoder::OptimizerState st;
  st.total_steps = 4;
  st.base_lr = 1.0;
  Tensor p = Tensor::vector({0.0});
  Tensor* params[] = {&p};
  const Tensor g[] = {Tensor::vector({0.0})};
  for (std::size_t t = 0; t < 4; ++t) CHECK(encoder::sgd_step(st, params, g, "x") == encoder::cosine_lr(t, 4, 1.0));
  CHECK(st.step == 4);
}

TEST_CASE("memory bank") {
  // identity encoder: one linear layer with identity weight
  encoder::EncoderParams id;
  encoder::Layer l;
  l.weight = Tensor::matrix(2, 2, {1, 0, 0, 1});
  l.bias = Tensor::vector({0, 0});
  id.layers.push_back(l);
  const Tensor x = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  const auto bank = membank::init_bank(id, x, 0.99, Domain::a);
  CHECK(bank.entries == x);

  Rng rng(8);
  const std::size_t hidden[] = {5};
  const auto enc = encoder::make_encoder(2, hidden, 3, rng);
  const auto b2 = membank::init_bank(enc, x, 0.99, Domain::b);
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor row = encoder::encode(enc, Tensor::matrix(1, 2, {x.at(i, 0), x.at(i, 1)}));
    for (std::size_t k = 0; k < 3; ++k) CHECK(b2.entries.at(i, k) == row.at(0, k));
  }
  auto zero = id;
  zero.layers[0].weight = Tensor::matrix(2, 2, {0, 0, 0, 0});
  const auto zb = membank::init_bank(zero, x, 0.5, Domain::a);
  for (double v : zb.entries.data()) CHECK(v == 0.0);

  membank::MemoryBank m;
  m.entries = Tensor::matrix(1, 2, {1, 0});
  m.momentum = 0.99;
  const double f[] = {0, 1};
  membank::momentum_update(m, 0, f);
  CHECK(m.entries.at(0, 0) == Approx(0.99).epsilon(1e-15));
  CHECK(m.entries.at(0, 1) == Approx(0.01).epsilon(1e-15));
  m.momentum = 0.0;
  membank::momentum_update(m, 0, f);
  CHECK(m.entries.at(0, 0) == 0.0);
  CHECK(m.entries.at(0, 1) == 1.0);
  m.momentum = 1.0;
  const double g[] = {7, 7};
  membank::momentum_update(m, 0, g);
  CHECK(m.entries.at(0, 1) == 1.0);

  membank::MemoryBank mm;
  mm.entries = Tensor::matrix(2, 2, {1, 1, 3, 3});
  CHECK(membank::bank_mean(mm) == std::vector<double>{2, 2});
  mm.entries = Tensor::matrix(1, 2, {4, -1});
  CHECK(membank::bank_mean(mm) == std::vector<double>{4, -1});

  // two-pass mean oracle
  mm.entries = test::random_matrix(rng, 100, 3, 10.0);
  const auto mean = membank::bank_mean(mm);
  for (std::size_t k = 0; k < 3; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < 100; ++i) s += mm.entries.at(i, k);
    const double first = s / 100.0;
    double corr = 0.0;
    for (std::size_t i = 0; i < 100; ++i) corr += mm.entries.at(i, k) - first;
    CHECK(std::abs(mean[k] - (first + corr / 100.0)) <= 1e-12);
  }
}
