#include <cmath>
#include <random>

#include "tidealloc/nn.hpp"

namespace tidealloc::nn {
namespace {

void require_shape(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + what);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor2 linear_forward(const Tensor2& x, const Tensor2& weight, const Tensor2& bias) {
  require_shape(x.cols() == weight.rows() && bias.rows() == 1 && bias.cols() == weight.cols(),
                "linear_forward");
  Matrix y = x.mat() * weight.mat();
  y.rowwise() += bias.mat().row(0);
  return Tensor2(std::move(y));
}

LinearGrads linear_backward(const Tensor2& x, const Tensor2& weight, const Tensor2& grad_y) {
  require_shape(x.cols() == weight.rows() && grad_y.rows() == x.rows() &&
                    grad_y.cols() == weight.cols(),
                "linear_backward");
  LinearGrads g;
  g.grad_x = Tensor2(Matrix(grad_y.mat() * weight.mat().transpose()));
  g.grad_weight = Tensor2(Matrix(x.mat().transpose() * grad_y.mat()));
  g.grad_bias = Tensor2(Matrix(grad_y.mat().colwise().sum()));
  return g;
}

Tensor2 relu_forward(const Tensor2& x) { return Tensor2(Matrix(x.mat().cwiseMax(0.0))); }

Tensor2 relu_backward(const Tensor2& x, const Tensor2& grad_y) {
  require_shape(x.same_shape(grad_y), "relu_backward");
  return Tensor2(Matrix((x.mat().array() > 0.0).select(grad_y.mat(), 0.0)));
}

Tensor2 sigmoid_forward(const Tensor2& x) {
  return Tensor2(Matrix(x.mat().unaryExpr(&stable_sigmoid)));
}

Tensor2 sigmoid_backward(const Tensor2& y, const Tensor2& grad_y) {
  require_shape(y.same_shape(grad_y), "sigmoid_backward");
  return Tensor2(Matrix(grad_y.mat().array() * y.mat().array() * (1.0 - y.mat().array())));
}

Tensor2 layer_norm_forward(const Tensor2& x, const Tensor2& gain, const Tensor2& bias,
                           LayerNormCache* cache) {
  require_shape(gain.rows() == 1 && bias.rows() == 1 && gain.cols() == x.cols() &&
                    bias.cols() == x.cols() && x.cols() >= 2,
                "layer_norm_forward");
  const auto n = static_cast<double>(x.cols());
  Matrix normalized(x.rows(), x.cols());
  std::vector<double> inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.mat().rows(); ++r) {
    const auto row = x.mat().row(r);
    const double mean = row.sum() / n;
    const double var = (row.array() - mean).square().sum() / n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    normalized.row(r) = (row.array() - mean) * inv;
    inv_std[r] = inv;
  }
  Matrix y = (normalized.array().rowwise() * gain.mat().row(0).array()).matrix();
  y.rowwise() += bias.mat().row(0);
  if (cache) {
    cache->normalized = Tensor2(std::move(normalized));
    cache->inv_std = std::move(inv_std);
  }
  return Tensor2(std::move(y));
}

LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Tensor2& gain,
                                   const Tensor2& grad_y) {
  const Matrix& xhat = cache.normalized.mat();
  require_shape(grad_y.same_shape(cache.normalized) && gain.cols() == grad_y.cols(),
                "layer_norm_backward");
  LayerNormGrads g;
  g.grad_gain = Tensor2(Matrix((grad_y.mat().array() * xhat.array()).colwise().sum()));
  g.grad_bias = Tensor2(Matrix(grad_y.mat().colwise().sum()));
  const Matrix dxhat = (grad_y.mat().array().rowwise() * gain.mat().row(0).array()).matrix();
  const auto n = static_cast<double>(grad_y.cols());
  Matrix dx(grad_y.rows(), grad_y.cols());
  for (Eigen::Index r = 0; r < dx.rows(); ++r) {
    const double mean_d = dxhat.row(r).sum() / n;
    const double mean_dx = dxhat.row(r).dot(xhat.row(r)) / n;
    dx.row(r) = cache.inv_std[r] *
                (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx).matrix();
  }
  g.grad_x = Tensor2(std::move(dx));
  return g;
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::layer_norm: return "layer_norm";
    case LayerKind::residual_block: return "residual_block";
  }
  return "?";
}

Tensor2 init_weight(std::size_t in, std::size_t out, InitScheme scheme, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double stddev = scheme == InitScheme::he
                            ? std::sqrt(2.0 / static_cast<double>(in))
                            : std::sqrt(2.0 / static_cast<double>(in + out));
  std::normal_distribution<double> normal(0.0, stddev);
  Tensor2 w(in, out);
  for (double& v : w.data()) v = normal(rng);
  return w;
}

// --- LinearLayer ---

LinearLayer::LinearLayer(ParameterSet& params, const std::string& prefix, std::size_t in,
                         std::size_t out, InitScheme init, std::uint64_t seed) {
  weight_ = params.add(prefix + "weight", init_weight(in, out, init, seed));
  bias_ = params.add(prefix + "bias", Tensor2(1, out));
}

Tensor2 LinearLayer::forward(const ParameterSet& params, const Tensor2& x) {
  input_ = x;
  return linear_forward(x, params[weight_].value, params[bias_].value);
}

Tensor2 LinearLayer::backward(ParameterSet& params, const Tensor2& grad_y) {
  LinearGrads g = linear_backward(input_, params[weight_].value, grad_y);
  params[weight_].grad.mat() += g.grad_weight.mat();
  params[bias_].grad.mat() += g.grad_bias.mat();
  return std::move(g.grad_x);
}

// --- ReluLayer ---

Tensor2 ReluLayer::forward(const ParameterSet&, const Tensor2& x) {
  input_ = x;
  min_margin_ = x.size() == 0 ? std::numeric_limits<double>::infinity()
                              : x.mat().cwiseAbs().minCoeff();
  return relu_forward(x);
}

Tensor2 ReluLayer::backward(ParameterSet&, const Tensor2& grad_y) {
  return relu_backward(input_, grad_y);
}

// --- SigmoidLayer ---

Tensor2 SigmoidLayer::forward(const ParameterSet&, const Tensor2& x) {
  output_ = sigmoid_forward(x);
  return output_;
}

Tensor2 SigmoidLayer::backward(ParameterSet&, const Tensor2& grad_y) {
  return sigmoid_backward(output_, grad_y);
}

// --- LayerNormLayer ---

LayerNormLayer::LayerNormLayer(ParameterSet& params, const std::string& prefix,
                               std::size_t width) {
  gain_ = params.add(prefix + "gain", Tensor2(1, width, 1.0));
  bias_ = params.add(prefix + "bias", Tensor2(1, width));
}

Tensor2 LayerNormLayer::forward(const ParameterSet& params, const Tensor2& x) {
  return layer_norm_forward(x, params[gain_].value, params[bias_].value, &cache_);
}

Tensor2 LayerNormLayer::backward(ParameterSet& params, const Tensor2& grad_y) {
  LayerNormGrads g = layer_norm_backward(cache_, params[gain_].value, grad_y);
  params[gain_].grad.mat() += g.grad_gain.mat();
  params[bias_].grad.mat() += g.grad_bias.mat();
  return std::move(g.grad_x);
}

// --- ResidualBlock ---

ResidualBlock::ResidualBlock(ParameterSet& params, const std::string& prefix, std::size_t width,
                             std::uint64_t seed)
    : inner_in_(params, prefix + "inner_in.", width, width, InitScheme::he, seed),
      inner_out_(params, prefix + "inner_out.", width, width, InitScheme::xavier, seed + 1),
      norm_(params, prefix + "norm.", width) {}

Tensor2 ResidualBlock::forward(const ParameterSet& params, const Tensor2& x) {
  Tensor2 h = inner_in_.forward(params, x);
  h = relu_.forward(params, h);
  h = inner_out_.forward(params, h);
  h.mat() += x.mat();
  return norm_.forward(params, h);
}

Tensor2 ResidualBlock::backward(ParameterSet& params, const Tensor2& grad_y) {
  const Tensor2 grad_sum = norm_.backward(params, grad_y);
  Tensor2 g = inner_out_.backward(params, grad_sum);
  g = relu_.backward(params, g);
  g = inner_in_.backward(params, g);
  g.mat() += grad_sum.mat();  // skip connection
  return g;
}

}  // namespace tidealloc::nn
