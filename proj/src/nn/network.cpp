#include <algorithm>
#include <cmath>
#include <random>

#include "tidealloc/nn.hpp"

namespace tidealloc::nn {
namespace {

std::uint64_t layer_seed(std::uint64_t seed, std::size_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Network Network::build(std::span<const LayerSpec> specs, std::uint64_t seed,
                       const std::string& name_prefix) {
  Network net;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    if (s.in == 0 || s.out == 0) throw ValidationError("layer " + std::to_string(i) + ": zero width");
    if (s.kind != LayerKind::linear && s.in != s.out) {
      throw ValidationError("layer " + std::to_string(i) + ": " + std::string(to_string(s.kind)) +
                            " must preserve width");
    }
    if (i > 0 && specs[i - 1].out != s.in) {
      throw ValidationError("layer " + std::to_string(i) + ": input width " +
                            std::to_string(s.in) + " does not match previous output " +
                            std::to_string(specs[i - 1].out));
    }
    const std::string prefix = name_prefix + "l" + std::to_string(i) + ".";
    switch (s.kind) {
      case LayerKind::linear: {
        const bool relu_next = i + 1 < specs.size() && specs[i + 1].kind == LayerKind::relu;
        net.layers_.emplace_back(LinearLayer(net.params_, prefix, s.in, s.out,
                                             relu_next ? InitScheme::he : InitScheme::xavier,
                                             layer_seed(seed, i)));
        break;
      }
      case LayerKind::relu: net.layers_.emplace_back(ReluLayer{}); break;
      case LayerKind::sigmoid: net.layers_.emplace_back(SigmoidLayer{}); break;
      case LayerKind::layer_norm:
        net.layers_.emplace_back(LayerNormLayer(net.params_, prefix, s.in));
        break;
      case LayerKind::residual_block:
        net.layers_.emplace_back(ResidualBlock(net.params_, prefix, s.in, layer_seed(seed, i)));
        break;
    }
    net.specs_.push_back(s);
  }
  return net;
}

Tensor2 Network::forward(const Tensor2& x) {
  if (x.cols() != input_dim()) {
    throw std::invalid_argument("network input width " + std::to_string(x.cols()) +
                                ", expected " + std::to_string(input_dim()));
  }
  Tensor2 h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = std::visit([&](auto& layer) { return layer.forward(params_, h); }, layers_[i]);
    h.require_finite("forward output of layer " + std::to_string(i));
  }
  return h;
}

Tensor2 Network::backward(const Tensor2& grad_out) {
  Tensor2 g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = std::visit([&](auto& layer) { return layer.backward(params_, g); }, layers_[i]);
    g.require_finite("backward output of layer " + std::to_string(i));
  }
  return g;
}

double Network::min_relu_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& layer : layers_) {
    if (const auto* r = std::get_if<ReluLayer>(&layer)) m = std::min(m, r->min_margin());
    if (const auto* b = std::get_if<ResidualBlock>(&layer)) m = std::min(m, b->min_margin());
  }
  return m;
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult finite_difference_check(ParameterSet& params, const std::function<double()>& loss,
                                        double h) {
  GradCheckResult result;
  for (auto& p : params) {
    if (p.frozen) continue;
    auto values = p.value.data();
    const auto grads = p.grad.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss();
      values[i] = saved - h;
      const double down = loss();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(grads[i], numeric);
      if (result.checked == 0 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_parameter = p.name + "[" + std::to_string(i) + "]";
      }
      ++result.checked;
    }
  }
  return result;
}

GradCheckResult grad_check(Network& net, const Tensor2& input, double h,
                           std::uint64_t probe_seed) {
  std::mt19937_64 rng(probe_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor2 probe(input.rows(), net.output_dim());
  for (double& v : probe.data()) v = normal(rng);

  auto loss = [&]() { return net.forward(input).mat().cwiseProduct(probe.mat()).sum(); };

  net.params().zero_grad();
  net.forward(input);
  const double margin = net.min_relu_margin();
  net.backward(probe);
  GradCheckResult result = finite_difference_check(net.params(), loss, h);
  result.min_relu_margin = margin;
  return result;
}

}  // namespace tidealloc::nn
