#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "uem/diffkit.hpp"
#include "uem/rng.hpp"

namespace uem::encoder {

using diffkit::Tape;
using diffkit::Tensor;
using diffkit::Var;

/// Affine layer y = x W + b with an optional rectified-linear activation.
/// weight is (in x out), bias is a vector of length out.
struct Layer {
  Tensor weight;
  Tensor bias;
  bool relu = false;

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
};

/// Feature extractor: a stack of affine layers.
struct EncoderParams {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.back().out_dim(); }
  /// Weight then bias of each layer, in layer order.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

/// Two affine layers: ReLU hidden, single logit passed through a sigmoid.
struct DomainClassifierParams {
  Layer hidden;
  Layer output;

  std::size_t input_dim() const { return hidden.in_dim(); }
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

enum class Init {
  /// uniform in +-sqrt(6 / fan_in)
  he_uniform,
  /// orthonormal rows or columns, gain sqrt(2) before a ReLU
  orthogonal,
};

Init parse_init(std::string_view s);
std::string_view to_string(Init i);

/// Biases start at zero. hidden lists the widths of the ReLU layers; the
/// output layer is linear.
EncoderParams make_encoder(std::size_t d_in, std::span<const std::size_t> hidden, std::size_t d_out, Rng& rng,
                           Init init = Init::he_uniform);
DomainClassifierParams make_classifier(std::size_t d_in, std::size_t hidden, Rng& rng);

/// Checks the layer chain and that every parameter is finite.
void validate(const EncoderParams& params);

/// Tape-free forward pass over the rows of x.
Tensor encode(const EncoderParams& params, const Tensor& x);

/// Register every parameter as a leaf on the tape, in parameters() order.
std::vector<Var> bind(Tape& tape, const EncoderParams& params);
std::vector<Var> bind(Tape& tape, const DomainClassifierParams& params);
/// Register parameters as constants (used for frozen snapshots).
std::vector<Var> bind_constant(Tape& tape, const EncoderParams& params);
std::vector<Var> bind_constant(Tape& tape, const DomainClassifierParams& params);

/// Differentiable forward pass; bound comes from bind().
Var encode(const EncoderParams& params, std::span<const Var> bound, Var x);

/// Domain probability g(f) for each feature row -> (n x 1).
Tensor classify_domain(const DomainClassifierParams& params, const Tensor& features);
double classify_domain(const DomainClassifierParams& params, std::span<const double> feature);
/// Differentiable probabilities -> (n x 1).
Var classify_domain(const DomainClassifierParams& params, std::span<const Var> bound, Var features);

/// 0.5 * lr0 * (1 + cos(pi * t / T)); T == 0 yields lr0.
double cosine_lr(std::size_t t, std::size_t total, double lr0);

struct OptimizerState {
  double momentum = 0.9;
  double base_lr = 2e-4;
  std::size_t total_steps = 0;
  std::size_t step = 0;
  std::vector<Tensor> velocity;
};

/// One momentum step at an explicit learning rate:
///   v <- momentum * v + g;  p <- p - lr * v.
/// Velocity buffers are created on first use. A non-finite gradient throws
/// NumericError naming `term`.
void sgd_apply(std::span<Tensor* const> params, std::span<const Tensor> grads, std::vector<Tensor>& velocity,
               double momentum, double lr, std::string_view term);

/// Scheduled step: lr = cosine_lr(state.step, state.total_steps, state.base_lr),
/// then state.step increments. Returns the learning rate used.
double sgd_step(OptimizerState& state, std::span<Tensor* const> params, std::span<const Tensor> grads,
                std::string_view term);

}  // namespace uem::encoder
