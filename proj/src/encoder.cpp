#include "uem/encoder.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "uem/error.hpp"

namespace uem::encoder {

Init parse_init(std::string_view s) {
  if (s == "he_uniform") return Init::he_uniform;
  if (s == "orthogonal") return Init::orthogonal;
  throw ConfigError("model.init: expected he_uniform or orthogonal, got '" + std::string(s) + "'");
}

std::string_view to_string(Init i) { return i == Init::orthogonal ? "orthogonal" : "he_uniform"; }

namespace {

// orthonormal rows (in <= out) or columns (in > out), Gram-Schmidt on Gaussian draws
void orthogonal_fill(Tensor& w, double gain, Rng& rng) {
  const std::size_t in = w.rows(), out = w.cols();
  const bool by_rows = in <= out;
  const std::size_t n = by_rows ? in : out, len = by_rows ? out : in;
  std::vector<std::vector<double>> basis;
  while (basis.size() < n) {
    std::vector<double> v(len);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      double p = 0.0;
      for (std::size_t k = 0; k < len; ++k) p += v[k] * b[k];
      for (std::size_t k = 0; k < len; ++k) v[k] -= p * b[k];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < len; ++k) (by_rows ? w.at(i, k) : w.at(k, i)) = gain * basis[i][k];
}

Layer make_layer(std::size_t in, std::size_t out, bool relu, Rng& rng, Init init = Init::he_uniform) {
  Layer layer{Tensor(diffkit::Shape{in, out}), Tensor(diffkit::Shape{out}), relu};
  if (init == Init::orthogonal) {
    orthogonal_fill(layer.weight, relu ? std::numbers::sqrt2 : 1.0, rng);
    return layer;
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
  return layer;
}

Tensor apply_layer(const Layer& layer, const Tensor& x) {
  Tensor y = diffkit::kernels::matmul(x, layer.weight);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
  }
  return layer.relu ? diffkit::kernels::relu(y) : y;
}

Var apply_layer(const Layer& layer, Var w, Var b, Var x) {
  Var y = diffkit::add(diffkit::matmul(x, w), diffkit::tile_rows(b, x.value().rows()));
  return layer.relu ? diffkit::relu(y) : y;
}

void require_input(std::size_t expected, const Tensor& x, const char* what) {
  if (x.rank() != 2 || x.cols() != expected) {
    throw ShapeError(std::string(what) + ": expected input with " + std::to_string(expected) +
                     " columns, got " + diffkit::shape_string(x.shape()));
  }
}

}  // namespace

std::vector<Tensor*> EncoderParams::parameters() {
  std::vector<Tensor*> out;
  for (Layer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> EncoderParams::parameters() const {
  std::vector<const Tensor*> out;
  for (const Layer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<Tensor*> DomainClassifierParams::parameters() {
  return {&hidden.weight, &hidden.bias, &output.weight, &output.bias};
}

std::vector<const Tensor*> DomainClassifierParams::parameters() const {
  return {&hidden.weight, &hidden.bias, &output.weight, &output.bias};
}

EncoderParams make_encoder(std::size_t d_in, std::span<const std::size_t> hidden, std::size_t d_out, Rng& rng,
                           Init init) {
  EncoderParams params;
  std::size_t prev = d_in;
  for (std::size_t width : hidden) {
    params.layers.push_back(make_layer(prev, width, true, rng, init));
    prev = width;
  }
  params.layers.push_back(make_layer(prev, d_out, false, rng, init));
  return params;
}

DomainClassifierParams make_classifier(std::size_t d_in, std::size_t hidden, Rng& rng) {
  DomainClassifierParams params;
  params.hidden = make_layer(d_in, hidden, true, rng);
  params.output = make_layer(hidden, 1, false, rng);
  return params;
}

void validate(const EncoderParams& params) {
  if (params.layers.empty()) throw ContractError("encoder has no layers");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const Layer& l = params.layers[i];
    if (l.weight.rank() != 2 || l.bias.size() != l.out_dim()) {
      throw ShapeError("encoder layer " + std::to_string(i) + " has inconsistent weight/bias shapes");
    }
    if (i > 0 && params.layers[i - 1].out_dim() != l.in_dim()) {
      throw ShapeError("encoder layer " + std::to_string(i) + " does not chain: " +
                       std::to_string(params.layers[i - 1].out_dim()) + " -> " + std::to_string(l.in_dim()));
    }
    if (!l.weight.all_finite() || !l.bias.all_finite()) {
      throw NumericError("encoder layer " + std::to_string(i) + " has non-finite parameters");
    }
  }
}

Tensor encode(const EncoderParams& params, const Tensor& x) {
  require_input(params.input_dim(), x, "encode");
  Tensor h = x;
  for (const Layer& l : params.layers) h = apply_layer(l, h);
  return h;
}

std::vector<Var> bind(Tape& tape, const EncoderParams& params) {
  std::vector<Var> out;
  for (const Tensor* p : params.parameters()) out.push_back(tape.leaf(*p));
  return out;
}

std::vector<Var> bind(Tape& tape, const DomainClassifierParams& params) {
  std::vector<Var> out;
  for (const Tensor* p : params.parameters()) out.push_back(tape.leaf(*p));
  return out;
}

std::vector<Var> bind_constant(Tape& tape, const EncoderParams& params) {
  std::vector<Var> out;
  for (const Tensor* p : params.parameters()) out.push_back(tape.constant(*p));
  return out;
}

std::vector<Var> bind_constant(Tape& tape, const DomainClassifierParams& params) {
  std::vector<Var> out;
  for (const Tensor* p : params.parameters()) out.push_back(tape.constant(*p));
  return out;
}

Var encode(const EncoderParams& params, std::span<const Var> bound, Var x) {
  require_input(params.input_dim(), x.value(), "encode");
  if (bound.size() != 2 * params.layers.size()) throw ContractError("encode: bound parameter count mismatch");
  Var h = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    h = apply_layer(params.layers[i], bound[2 * i], bound[2 * i + 1], h);
  }
  return h;
}

Tensor classify_domain(const DomainClassifierParams& params, const Tensor& features) {
  require_input(params.input_dim(), features, "classify_domain");
  Tensor logits = apply_layer(params.output, apply_layer(params.hidden, features));
  return diffkit::kernels::sigmoid(logits);
}

double classify_domain(const DomainClassifierParams& params, std::span<const double> feature) {
  Tensor x(diffkit::Shape{1, feature.size()}, std::vector<double>(feature.begin(), feature.end()));
  return classify_domain(params, x)[0];
}

Var classify_domain(const DomainClassifierParams& params, std::span<const Var> bound, Var features) {
  require_input(params.input_dim(), features.value(), "classify_domain");
  if (bound.size() != 4) throw ContractError("classify_domain: bound parameter count mismatch");
  Var h = apply_layer(params.hidden, bound[0], bound[1], features);
  return diffkit::sigmoid(apply_layer(params.output, bound[2], bound[3], h));
}

double cosine_lr(std::size_t t, std::size_t total, double lr0) {
  if (total == 0) return lr0;
  if (t > total) throw ContractError("cosine_lr: step " + std::to_string(t) + " beyond total " + std::to_string(total));
  if (t == total) return 0.0;
  const double ratio = static_cast<double>(t) / static_cast<double>(total);
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * ratio));
}

void sgd_apply(std::span<Tensor* const> params, std::span<const Tensor> grads, std::vector<Tensor>& velocity,
               double momentum, double lr, std::string_view term) {
  if (params.size() != grads.size()) throw ContractError("sgd: parameter/gradient count mismatch");
  if (velocity.empty()) {
    for (const Tensor* p : params) velocity.push_back(Tensor::zeros_like(*p));
  }
  if (velocity.size() != params.size()) throw ContractError("sgd: velocity count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape() || velocity[i].shape() != params[i]->shape()) {
      throw ShapeError("sgd: parameter " + std::to_string(i) + " shape " + diffkit::shape_string(params[i]->shape()) +
                       " vs gradient " + diffkit::shape_string(grads[i].shape()));
    }
    if (!grads[i].all_finite()) {
      throw NumericError("non-finite gradient from loss term '" + std::string(term) + "' (parameter " +
                         std::to_string(i) + ")");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& v = velocity[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = momentum * v[k] + grads[i][k];
      p[k] -= lr * v[k];
    }
  }
}

double sgd_step(OptimizerState& state, std::span<Tensor* const> params, std::span<const Tensor> grads,
                std::string_view term) {
  const double lr = cosine_lr(state.step, state.total_steps, state.base_lr);
  sgd_apply(params, grads, state.velocity, state.momentum, lr, term);
  ++state.step;
  return lr;
}

}  // namespace uem::encoder
