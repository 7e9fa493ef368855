#include "uem/diffkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "uem/error.hpp"

namespace uem::diffkit {

namespace {

constexpr double kLogFloor = 1e-12;

std::size_t product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                   shape_string(b));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

void accumulate(Tensor* dst, const Tensor& src) {
  if (dst == nullptr) return;
  auto d = dst->data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Tape& tape_of(Var a) {
  if (a.tape() == nullptr) throw ContractError("variable is not attached to a tape");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape()) throw ContractError("operands recorded on different tapes");
  return tape_of(a);
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  if (shape_.size() > 2) throw ShapeError("tensor rank above 2: " + shape_string(shape_));
  for (std::size_t e : shape_) {
    if (e == 0) throw ShapeError("tensor extents must be positive: " + shape_string(shape_));
  }
  data_.assign(product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : Tensor(std::move(shape)) {
  if (data.size() != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_string(shape_));
  }
  data_ = std::move(data);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor(Shape{rows, cols}, std::move(data));
}

std::size_t Tensor::rows() const { return rank() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  return 1;
}

std::span<double> Tensor::row(std::size_t r) {
  return std::span<double>(data_).subspan(r * cols(), cols());
}

std::span<const double> Tensor::row(std::size_t r) const {
  return std::span<const double>(data_).subspan(r * cols(), cols());
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> rows) {
  require_matrix("gather_rows", m);
  Tensor out(Shape{rows.size(), m.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) throw ContractError("gather_rows: row index out of range");
    std::copy_n(m.row(rows[i]).begin(), m.cols(), out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernels

namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  if (a.cols() != b.rows()) shape_mismatch("matmul", a.shape(), b.shape());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.row(i).data();
    const double* arow = a.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  Tensor out(Shape{a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = a;
  for (double& x : out.data()) x = sigmoid(x);
  return out;
}

Tensor tile_rows(const Tensor& row, std::size_t n) {
  if (row.rank() == 2 && row.rows() != 1) {
    throw ShapeError("tile_rows: expected a single row, got " + shape_string(row.shape()));
  }
  if (n == 0) throw ShapeError("tile_rows: zero repetitions");
  const std::size_t d = row.cols();
  Tensor out(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i) std::copy_n(row.data().begin(), d, out.row(i).begin());
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  Tensor out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double mx = row[0];
    for (double x : row) mx = std::max(mx, x);
    double total = 0.0;
    for (double& x : row) {
      x = std::exp(x - mx);
      total += x;
    }
    for (double& x : row) x /= total;
  }
  return out;
}

Tensor normalize_rows(const Tensor& a) {
  Tensor out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double n = l2norm(row);
    if (n == 0.0) continue;
    for (double& x : row) x /= n;
  }
  return out;
}

double inner(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    shape_mismatch("inner", Shape{a.size()}, Shape{b.size()});
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2norm(std::span<const double> a) { return std::sqrt(inner(a, a)); }

double euclid(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    shape_mismatch("euclid", Shape{a.size()}, Shape{b.size()});
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = l2norm(a), nb = l2norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine of a zero vector is undefined");
  return inner(a, b) / (na * nb);
}

Tensor pairwise_euclid(const Tensor& a, const Tensor& b) {
  require_matrix("pairwise_euclid", a);
  require_matrix("pairwise_euclid", b);
  if (a.cols() != b.cols()) shape_mismatch("pairwise_euclid", a.shape(), b.shape());
  Tensor out(Shape{a.rows(), b.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out.at(i, j) = euclid(a.row(i), b.row(j));
  return out;
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ContractError("variable is not attached to a tape");
  return tape_->value(*this);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), Kind::leaf, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Kind::constant, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  // An operation over constants only is itself a constant.
  bool differentiable = false;
  for (std::size_t in : inputs) differentiable = differentiable || nodes_.at(in).kind != Kind::constant;
  if (!differentiable) return constant(std::move(value));
  nodes_.push_back(Node{std::move(value), Kind::op, std::move(inputs), std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var root) const {
  if (root.tape() != this) throw ContractError("backward: root belongs to another tape");
  const Tensor& root_value = value(root);
  if (root_value.size() != 1) {
    throw ContractError("backward: root must be scalar, got " + shape_string(root_value.shape()));
  }

  std::vector<Tensor> adj(nodes_.size());
  std::vector<bool> live(nodes_.size(), false);
  for (std::size_t i = 0; i < nodes_.size(); ++i) adj[i] = Tensor::zeros_like(nodes_[i].value);
  adj[root.id()].data()[0] = 1.0;
  live[root.id()] = true;

  std::vector<Tensor*> in_grads;
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!live[id] || node.kind != Kind::op) continue;
    in_grads.clear();
    for (std::size_t in : node.inputs) {
      if (nodes_[in].kind == Kind::constant) {
        in_grads.push_back(nullptr);
      } else {
        live[in] = true;
        in_grads.push_back(&adj[in]);
      }
    }
    node.backward(adj[id], in_grads);
  }
  return Gradients(std::move(adj));
}

// ---------------------------------------------------------------------------
// Primitive operations

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Tensor out = kernels::matmul(a.value(), b.value());
  const Tape* tp = &t;
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [tp, ia, ib](const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& av = tp->value_at(ia);
    const Tensor& bv = tp->value_at(ib);
    if (gi[0]) accumulate(gi[0], kernels::matmul(g, kernels::transpose(bv)));
    if (gi[1]) accumulate(gi[1], kernels::matmul(kernels::transpose(av), g));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.record(kernels::transpose(a.value()), {a.id()},
                  [](const Tensor& g, std::span<Tensor* const> gi) {
                    accumulate(gi[0], kernels::transpose(g));
                  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(kernels::add(a.value(), b.value()), {a.id(), b.id()},
                  [](const Tensor& g, std::span<Tensor* const> gi) {
                    accumulate(gi[0], g);
                    accumulate(gi[1], g);
                  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(kernels::sub(a.value(), b.value()), {a.id(), b.id()},
                  [](const Tensor& g, std::span<Tensor* const> gi) {
                    accumulate(gi[0], g);
                    if (gi[1]) {
                      auto d = gi[1]->data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
                    }
                  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same("hadamard", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const Tape* tp = &t;
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [tp, ia, ib](const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& av = tp->value_at(ia);
    const Tensor& bv = tp->value_at(ib);
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * bv[i];
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * av[i];
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (double& x : out.data()) x *= s;
  return t.record(std::move(out), {a.id()}, [s](const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += s * g[i];
  });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (double& x : out.data()) x += s;
  return t.record(std::move(out), {a.id()},
                  [](const Tensor& g, std::span<Tensor* const> gi) { accumulate(gi[0], g); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
  Tape& t = tape_of(a);
  const Tape* tp = &t;
  const std::size_t ia = a.id();
  return t.record(kernels::relu(a.value()), {ia}, [tp, ia](const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& av = tp->value_at(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > 0.0) (*gi[0])[i] += g[i];
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (double& x : out.data()) x = std::exp(x);
  const Tape* tp = &t;
  const std::size_t self = t.size();
  return t.record(std::move(out), {a.id()}, [tp, self](const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& ov = tp->value_at(self);
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * ov[i];
  });
}

Var log(Var a) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  std::vector<bool> clamped(out.size(), false);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    if (!(x > 0.0)) {
      throw DomainError("log: non-positive argument " + std::to_string(x) + " at entry " +
                        std::to_string(i));
    }
    if (x < kLogFloor) {
      clamped[i] = true;
      t.note_log_clamp();
      out[i] = std::log(kLogFloor);
    } else {
      out[i] = std::log(x);
    }
  }
  const Tape* tp = &t;
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia},
                  [tp, ia, clamped = std::move(clamped)](const Tensor& g, std::span<Tensor* const> gi) {
                    const Tensor& av = tp->value_at(ia);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      if (!clamped[i]) (*gi[0])[i] += g[i] / av[i];
                  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  const Tape* tp = &t;
  const std::size_t self = t.size();
  return t.record(kernels::sigmoid(a.value()), {a.id()},
                  [tp, self](const Tensor& g, std::span<Tensor* const> gi) {
                    const Tensor& ov = tp->value_at(self);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      (*gi[0])[i] += g[i] * ov[i] * (1.0 - ov[i]);
                  });
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (double& x : out.data()) x = std::clamp(x, lo, hi);
  const Tape* tp = &t;
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia}, [tp, ia, lo, hi](const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& av = tp->value_at(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] >= lo && av[i] <= hi) (*gi[0])[i] += g[i];
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return t.record(Tensor::scalar(s), {a.id()}, [](const Tensor& g, std::span<Tensor* const> gi) {
    const double gv = g[0];
    for (double& x : gi[0]->data()) x += gv;
  });
}

Var inner(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same("inner", a.value(), b.value());
  const double s = kernels::inner(a.value().data(), b.value().data());
  const Tape* tp = &t;
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(Tensor::scalar(s), {ia, ib}, [tp, ia, ib](const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& av = tp->value_at(ia);
    const Tensor& bv = tp->value_at(ib);
    const double gv = g[0];
    if (gi[0])
      for (std::size_t i = 0; i < av.size(); ++i) (*gi[0])[i] += gv * bv[i];
    if (gi[1])
      for (std::size_t i = 0; i < av.size(); ++i) (*gi[1])[i] += gv * av[i];
  });
}

Var l2norm(Var a) {
  Tape& t = tape_of(a);
  const double n = kernels::l2norm(a.value().data());
  const Tape* tp = &t;
  const std::size_t ia = a.id();
  return t.record(Tensor::scalar(n), {ia}, [tp, ia, n](const Tensor& g, std::span<Tensor* const> gi) {
    if (n == 0.0) return;
    const Tensor& av = tp->value_at(ia);
    for (std::size_t i = 0; i < av.size(); ++i) (*gi[0])[i] += g[0] * av[i] / n;
  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Tape* tp = &t;
  const std::size_t self = t.size();
  return t.record(kernels::softmax_rows(a.value()), {a.id()},
                  [tp, self](const Tensor& g, std::span<Tensor* const> gi) {
                    const Tensor& s = tp->value_at(self);
                    for (std::size_t r = 0; r < s.rows(); ++r) {
                      auto sr = s.row(r);
                      auto gr = g.row(r);
                      const double dot = kernels::inner(sr, gr);
                      auto out = gi[0]->row(r);
                      for (std::size_t j = 0; j < sr.size(); ++j) out[j] += sr[j] * (gr[j] - dot);
                    }
                  });
}

Var normalize_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  std::vector<double> norms(av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    norms[r] = kernels::l2norm(av.row(r));
    if (norms[r] == 0.0) {
      throw DomainError("normalize_rows: row " + std::to_string(r) + " has zero norm");
    }
  }
  const Tape* tp = &t;
  const std::size_t self = t.size();
  return t.record(kernels::normalize_rows(av), {a.id()},
                  [tp, self, norms = std::move(norms)](const Tensor& g, std::span<Tensor* const> gi) {
                    const Tensor& u = tp->value_at(self);
                    for (std::size_t r = 0; r < u.rows(); ++r) {
                      auto ur = u.row(r);
                      auto gr = g.row(r);
                      const double dot = kernels::inner(ur, gr);
                      auto out = gi[0]->row(r);
                      for (std::size_t j = 0; j < ur.size(); ++j)
                        out[j] += (gr[j] - ur[j] * dot) / norms[r];
                    }
                  });
}

Var pairwise_euclid(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tape* tp = &t;
  const std::size_t ia = a.id(), ib = b.id();
  const std::size_t self = t.size();
  return t.record(kernels::pairwise_euclid(a.value(), b.value()), {ia, ib},
                  [tp, ia, ib, self](const Tensor& g, std::span<Tensor* const> gi) {
                    const Tensor& av = tp->value_at(ia);
                    const Tensor& bv = tp->value_at(ib);
                    const Tensor& dv = tp->value_at(self);
                    const std::size_t d = av.cols();
                    for (std::size_t i = 0; i < av.rows(); ++i) {
                      auto ar = av.row(i);
                      for (std::size_t j = 0; j < bv.rows(); ++j) {
                        const double dist = dv.at(i, j);
                        if (dist == 0.0) continue;
                        const double coef = g.at(i, j) / dist;
                        auto br = bv.row(j);
                        if (gi[0]) {
                          auto out = gi[0]->row(i);
                          for (std::size_t k = 0; k < d; ++k) out[k] += coef * (ar[k] - br[k]);
                        }
                        if (gi[1]) {
                          auto out = gi[1]->row(j);
                          for (std::size_t k = 0; k < d; ++k) out[k] -= coef * (ar[k] - br[k]);
                        }
                      }
                    }
                  });
}

Var euclid(Var a, Var b) { return l2norm(sub(a, b)); }

Var tile_rows(Var row, std::size_t n) {
  Tape& t = tape_of(row);
  return t.record(kernels::tile_rows(row.value(), n), {row.id()},
                  [](const Tensor& g, std::span<Tensor* const> gi) {
                    auto out = gi[0]->data();
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      auto gr = g.row(r);
                      for (std::size_t j = 0; j < gr.size(); ++j) out[j] += gr[j];
                    }
                  });
}

Var hcat(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix("hcat", av);
  require_matrix("hcat", bv);
  if (av.rows() != bv.rows()) shape_mismatch("hcat", av.shape(), bv.shape());
  const std::size_t ca = av.cols(), cb = bv.cols();
  Tensor out(Shape{av.rows(), ca + cb});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.row(r).begin(), ca, out.row(r).begin());
    std::copy_n(bv.row(r).begin(), cb, out.row(r).begin() + ca);
  }
  return t.record(std::move(out), {a.id(), b.id()},
                  [ca, cb](const Tensor& g, std::span<Tensor* const> gi) {
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      auto gr = g.row(r);
                      if (gi[0]) {
                        auto o = gi[0]->row(r);
                        for (std::size_t j = 0; j < ca; ++j) o[j] += gr[j];
                      }
                      if (gi[1]) {
                        auto o = gi[1]->row(r);
                        for (std::size_t j = 0; j < cb; ++j) o[j] += gr[ca + j];
                      }
                    }
                  });
}

Var masked_logsumexp_rows(Var a, const Tensor& mask) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  require_same("masked_logsumexp_rows", av, mask);
  const std::size_t n = av.rows(), m = av.cols();
  Tensor out(Shape{n, 1});
  Tensor weights(av.shape());  // softmax over the masked entries
  for (std::size_t r = 0; r < n; ++r) {
    auto ar = av.row(r);
    auto mr = mask.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j)
      if (mr[j] != 0.0) mx = std::max(mx, ar[j]);
    if (!std::isfinite(mx)) {
      throw DomainError("masked_logsumexp_rows: row " + std::to_string(r) + " selects no entries");
    }
    double total = 0.0;
    auto wr = weights.row(r);
    for (std::size_t j = 0; j < m; ++j) {
      if (mr[j] == 0.0) continue;
      wr[j] = std::exp(ar[j] - mx);
      total += wr[j];
    }
    for (std::size_t j = 0; j < m; ++j) wr[j] /= total;
    out.at(r, 0) = mx + std::log(total);
  }
  return t.record(std::move(out), {a.id()},
                  [weights = std::move(weights)](const Tensor& g, std::span<Tensor* const> gi) {
                    for (std::size_t r = 0; r < weights.rows(); ++r) {
                      auto wr = weights.row(r);
                      auto o = gi[0]->row(r);
                      for (std::size_t j = 0; j < wr.size(); ++j) o[j] += g[r] * wr[j];
                    }
                  });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

// ---------------------------------------------------------------------------
// Gradient checking

std::vector<Tensor> gradients(const ScalarExpr& expr, std::span<const Tensor> leaves) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(leaves.size());
  for (const Tensor& l : leaves) vars.push_back(tape.leaf(l));
  Var root = expr(tape, vars);
  Gradients g = tape.backward(root);
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(g[v]);
  return out;
}

double grad_check(const ScalarExpr& expr, std::span<const Tensor> leaves, double h) {
  if (!(h > 0.0)) throw ContractError("grad_check: step must be positive");
  const std::vector<Tensor> analytic = gradients(expr, leaves);

  std::vector<Tensor> probe(leaves.begin(), leaves.end());
  auto eval = [&]() {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& l : probe) vars.push_back(tape.leaf(l));
    return expr(tape, vars).value().item();
  };

  double worst = 0.0;
  for (std::size_t li = 0; li < probe.size(); ++li) {
    for (std::size_t k = 0; k < probe[li].size(); ++k) {
      const double orig = probe[li][k];
      probe[li][k] = orig + h;
      const double up = eval();
      probe[li][k] = orig - h;
      const double down = eval();
      probe[li][k] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[li][k];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace uem::diffkit
