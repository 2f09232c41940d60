#include <algorithm>

#include "tidealloc/ddpg.hpp"

namespace tidealloc::ddpg {

std::vector<nn::LayerSpec> tide_encoder_specs(const NetworkShape& shape) {
  using nn::LayerSpec;
  return {LayerSpec::linear(shape.input_dim, shape.projection_width),
          LayerSpec::relu(shape.projection_width),
          LayerSpec::linear(shape.projection_width, shape.latent_width),
          LayerSpec::residual_block(shape.latent_width),
          LayerSpec::residual_block(shape.latent_width)};
}

Actor::Actor(const NetworkShape& shape, double max_weight, std::uint64_t seed)
    : max_weight_(max_weight) {
  auto specs = tide_encoder_specs(shape);
  specs.push_back(nn::LayerSpec::linear(shape.latent_width, 1));
  specs.push_back(nn::LayerSpec::sigmoid(1));
  net_ = nn::Network::build(specs, seed, "actor.");
}

nn::Tensor2 Actor::forward(const nn::Tensor2& states) {
  nn::Tensor2 w = net_.forward(states);
  w.mat() *= max_weight_;
  return w;
}

nn::Tensor2 Actor::backward(const nn::Tensor2& grad_weights) {
  nn::Tensor2 g = grad_weights;
  g.mat() *= max_weight_;
  return net_.backward(g);
}

Critic::Critic(const NetworkShape& shape, std::uint64_t seed) : latent_width_(shape.latent_width) {
  encoder_ = nn::Network::build(tide_encoder_specs(shape), seed, "critic.encoder.");
  using nn::LayerSpec;
  const std::vector<LayerSpec> head = {
      LayerSpec::linear(shape.latent_width + 1, shape.critic_width),
      LayerSpec::relu(shape.critic_width),
      LayerSpec::linear(shape.critic_width, shape.critic_width),
      LayerSpec::relu(shape.critic_width),
      LayerSpec::linear(shape.critic_width, 1)};
  head_ = nn::Network::build(head, seed + 7919, "critic.head.");
}

nn::Tensor2 Critic::forward(const nn::Tensor2& states, const nn::Tensor2& actions) {
  if (actions.rows() != states.rows() || actions.cols() != 1) {
    throw std::invalid_argument("critic: actions must be B x 1");
  }
  const nn::Tensor2 latent = encoder_.forward(states);
  nn::Matrix joined(latent.rows(), latent_width_ + 1);
  joined.leftCols(latent_width_) = latent.mat();
  joined.col(latent_width_) = actions.mat().col(0);
  return head_.forward(nn::Tensor2(std::move(joined)));
}

nn::Tensor2 Critic::backward(const nn::Tensor2& grad_q) {
  const nn::Tensor2 g = head_.backward(grad_q);
  encoder_.backward(nn::Tensor2(nn::Matrix(g.mat().leftCols(latent_width_))));
  return nn::Tensor2(nn::Matrix(g.mat().col(latent_width_)));
}

void Critic::zero_grad() {
  encoder_.params().zero_grad();
  head_.params().zero_grad();
}

double Critic::min_relu_margin() const {
  return std::min(encoder_.min_relu_margin(), head_.min_relu_margin());
}

OUNoise::OUNoise(double theta, double sigma, double mu, std::uint64_t seed)
    : theta_(theta), sigma_(sigma), mu_(mu), state_(mu), rng_(seed) {}

double OUNoise::sample() {
  state_ += theta_ * (mu_ - state_) + sigma_ * normal_(rng_);
  return state_;
}

void soft_update(const nn::ParameterSet& online, nn::ParameterSet& target, double tau) {
  if (!online.same_layout(target)) throw std::invalid_argument("soft_update: parameter layout mismatch");
  for (std::size_t i = 0; i < online.size(); ++i) {
    auto& t = target[i].value.mat();
    t = tau * online[i].value.mat() + (1.0 - tau) * t;
  }
}

nn::Tensor2 stack_states(std::span<const env::Observation* const> states) {
  if (states.empty()) throw std::invalid_argument("stack_states: empty batch");
  const std::size_t dim = states.front()->size();
  nn::Tensor2 out(states.size(), dim);
  for (std::size_t r = 0; r < states.size(); ++r) {
    const auto v = states[r]->values();
    if (v.size() != dim) throw std::invalid_argument("stack_states: ragged observations");
    std::copy(v.begin(), v.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * dim));
  }
  return out;
}

}  // namespace tidealloc::ddpg
