#pragma once

// Reverse-mode differentiation over dense row-major double tensors.
//
// Tensors have rank 0 (scalar), 1 (vector) or 2 (matrix). Row-wise operations
// treat a vector as a single row. There is no implicit broadcasting except
// scalar-with-tensor; bias rows must be tiled explicitly with tile_rows().
// All reductions run in fixed left-to-right index order so that repeated
// evaluation is bit-identical.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace uem::diffkit {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

class Tensor {
 public:
  /// Rank-0 tensor holding 0.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  /// Row count; 1 for scalars and vectors.
  std::size_t rows() const;
  /// Column count; vector length for vectors, 1 for scalars.
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  /// Value of a single-element tensor.
  double item() const;
  bool all_finite() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Copy the listed rows of a matrix into a new matrix.
Tensor gather_rows(const Tensor& m, std::span<const std::size_t> rows);

/// Tape-free kernels. The tape operations call these for their forward values,
/// so an expression evaluated with or without a tape yields identical bits.
namespace kernels {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
double sigmoid(double x);
Tensor tile_rows(const Tensor& row, std::size_t n);
Tensor softmax_rows(const Tensor& a);
/// Each row scaled to unit L2 norm; zero rows are left at zero.
Tensor normalize_rows(const Tensor& a);
double inner(std::span<const double> a, std::span<const double> b);
double l2norm(std::span<const double> a);
double euclid(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const double> a, std::span<const double> b);
/// (n x d), (m x d) -> (n x m) Euclidean distances.
Tensor pairwise_euclid(const Tensor& a, const Tensor& b);
}  // namespace kernels

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Accumulates gradients of every input from the gradient of a node's output.
using BackwardFn = std::function<void(const Tensor& out_grad, std::span<Tensor* const> in_grads)>;

/// Per-node gradients produced by Tape::backward.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  /// Gradient with respect to v; zeros when v is unreachable from the root.
  const Tensor& operator[](Var v) const { return grads_.at(v.id()); }

 private:
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (parameter).
  Var leaf(Tensor value);
  /// Non-differentiable input; its gradient is never accumulated into.
  Var constant(Tensor value);

  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  const Tensor& value_at(std::size_t id) const { return nodes_[id].value; }
  bool is_leaf(Var v) const { return nodes_.at(v.id()).kind == Kind::leaf; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar root; visits every node at most once in
  /// reverse recording order.
  Gradients backward(Var root) const;

  /// Number of log() arguments clamped up to the 1e-12 floor.
  std::size_t log_clamp_count() const { return log_clamps_; }
  void note_log_clamp() { ++log_clamps_; }

 private:
  enum class Kind { leaf, constant, op };
  struct Node {
    Tensor value;
    Kind kind;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::size_t log_clamps_ = 0;
};

// Primitive operations. Every operand must live on the same tape.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equally shaped tensors.
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
Var relu(Var a);
Var exp(Var a);
/// Natural log. Non-positive arguments throw DomainError; positive arguments
/// below 1e-12 are raised to 1e-12 (zero gradient) and counted on the tape.
Var log(Var a);
Var sigmoid(Var a);
/// Elementwise clamp to [lo, hi]; gradient is zero where clamped.
Var clamp(Var a, double lo, double hi);
/// Sum of all entries -> scalar.
Var sum(Var a);
/// Sum of elementwise products of two equally shaped tensors -> scalar.
Var inner(Var a, Var b);
/// Frobenius / L2 norm -> scalar. Gradient at the origin is taken as zero.
Var l2norm(Var a);
Var softmax_rows(Var a);
/// Each row divided by its L2 norm. Zero rows throw DomainError.
Var normalize_rows(Var a);
/// (n x d), (m x d) -> (n x m) Euclidean distances. Gradient at zero distance
/// is taken as zero.
Var pairwise_euclid(Var a, Var b);
/// Euclidean distance between two equally shaped tensors -> scalar.
Var euclid(Var a, Var b);
/// Repeat a vector (or 1 x d matrix) n times -> (n x d).
Var tile_rows(Var row, std::size_t n);
/// Horizontal concatenation of two matrices with equal row counts.
Var hcat(Var a, Var b);
/// Per-row log-sum-exp over the entries where mask is nonzero -> (n x 1).
/// Every row of the mask must select at least one entry.
Var masked_logsumexp_rows(Var a, const Tensor& mask);
/// Stop-gradient copy.
Var detach(Var a);

/// Builds a scalar expression on a fresh tape from leaf variables.
using ScalarExpr = std::function<Var(Tape&, std::span<const Var>)>;

/// Maximum over all leaf entries of |analytic - central difference| /
/// max(1, |analytic|).
double grad_check(const ScalarExpr& expr, std::span<const Tensor> leaves, double h = 1e-4);

/// Analytic gradients of expr at the given leaf values.
std::vector<Tensor> gradients(const ScalarExpr& expr, std::span<const Tensor> leaves);

}  // namespace uem::diffkit
