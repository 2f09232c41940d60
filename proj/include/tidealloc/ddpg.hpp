#pragma once

// DDPG agent whose actor and critic each read the state through a TiDE-style dense encoder.

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "tidealloc/env.hpp"
#include "tidealloc/nn.hpp"

namespace tidealloc::ddpg {

struct NetworkShape {
  std::size_t input_dim = env::Observation::size_for(env::kDefaultWindow);
  std::size_t projection_width = 128;
  std::size_t latent_width = 64;
  std::size_t critic_width = 64;
};

/// Flattened window -> Linear(in, P) -> ReLU -> Linear(P, L) -> 2 x ResidualBlock(L).
std::vector<nn::LayerSpec> tide_encoder_specs(const NetworkShape& shape);

/// Encoder -> Linear(L, 1) -> sigmoid, scaled by max_weight.
class Actor {
 public:
  Actor(const NetworkShape& shape, double max_weight, std::uint64_t seed);

  /// states: B x input_dim. Returns B x 1 weights in [0, max_weight].
  nn::Tensor2 forward(const nn::Tensor2& states);
  /// Accumulates parameter gradients from d(loss)/d(weight); returns d(loss)/d(states).
  nn::Tensor2 backward(const nn::Tensor2& grad_weights);

  nn::Network& network() { return net_; }
  const nn::Network& network() const { return net_; }
  nn::ParameterSet& params() { return net_.params(); }
  const nn::ParameterSet& params() const { return net_.params(); }
  double max_weight() const { return max_weight_; }

 private:
  nn::Network net_;
  double max_weight_ = 1.0;
};

/// concat(encoder(state), action) -> 2 x (Linear + ReLU) -> Linear -> Q.
class Critic {
 public:
  Critic(const NetworkShape& shape, std::uint64_t seed);

  /// states: B x input_dim, actions: B x 1. Returns B x 1.
  nn::Tensor2 forward(const nn::Tensor2& states, const nn::Tensor2& actions);
  /// Accumulates parameter gradients; returns d(loss)/d(actions), B x 1.
  nn::Tensor2 backward(const nn::Tensor2& grad_q);

  nn::Network& encoder() { return encoder_; }
  nn::Network& head() { return head_; }
  std::array<nn::ParameterSet*, 2> parameter_sets() { return {&encoder_.params(), &head_.params()}; }
  std::array<const nn::ParameterSet*, 2> parameter_sets() const {
    return {&encoder_.params(), &head_.params()};
  }
  void zero_grad();
  double min_relu_margin() const;

 private:
  nn::Network encoder_;
  nn::Network head_;
  std::size_t latent_width_ = 0;
};

/// x <- x + theta (mu - x) + sigma * N(0, 1)
class OUNoise {
 public:
  OUNoise(double theta, double sigma, double mu, std::uint64_t seed);
  double sample();
  void reset() { state_ = mu_; }
  double state() const { return state_; }
  void set_state(double x) { state_ = x; }

 private:
  double theta_;
  double sigma_;
  double mu_;
  double state_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct Transition {
  env::Observation state;
  double action = 0.0;
  double reward = 0.0;           // sum_{i<steps} gamma^i r_{t+i}
  env::Observation next_state;   // state `steps` ahead; meaningless when done
  bool done = false;
  std::size_t steps = 1;         // rewards aggregated (< n only at episode end)
  std::size_t episode_step = 0;  // t of the first aggregated step
};

/// FIFO replay memory that stores n-step aggregated transitions.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t n_step, double gamma_td);

  /// Records one raw environment step; emits aggregated transitions as they complete.
  void push(const env::Observation& s, double a, double r, const env::Observation* s_next,
            bool done);
  /// Drops a partially aggregated episode (e.g. after an aborted episode).
  void discard_pending();

  /// Uniform mini-batch, no repeats within a batch. Throws ProtocolError when underfilled.
  std::vector<const Transition*> sample(std::size_t batch_size, std::mt19937_64& rng) const;

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t n_step() const { return n_step_; }
  /// Oldest-first view of stored transitions.
  std::vector<const Transition*> contents() const;

 private:
  struct RawStep {
    env::Observation state;
    double action;
    double reward;
    env::Observation next_state;
    bool done;
    std::size_t episode_step;
  };
  void emit_front();

  std::size_t capacity_;
  std::size_t n_step_;
  double gamma_;
  std::deque<RawStep> pending_;
  std::size_t episode_step_ = 0;
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;  // next slot to overwrite once full
};

struct DdpgConfig {
  double gamma_td = 0.9;
  double tau = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t buffer_capacity = 20000;
  std::size_t n_step = 3;
  std::size_t episodes = 30;
  std::uint64_t seed = 1;
  double max_weight = 1.0;
  std::size_t projection_width = 128;
  std::size_t latent_width = 64;
  std::size_t critic_width = 64;
  double ou_theta = 0.15;
  double ou_sigma = 0.2;  // multiplied by max_weight

  void validate() const;
  NetworkShape shape(std::size_t input_dim) const {
    return {input_dim, projection_width, latent_width, critic_width};
  }
};

/// target <- tau * online + (1 - tau) * target, entrywise.
void soft_update(const nn::ParameterSet& online, nn::ParameterSet& target, double tau);

nn::Tensor2 stack_states(std::span<const env::Observation* const> states);

class Agent {
 public:
  Agent(const DdpgConfig& config, std::size_t observation_size);

  /// clamp(actor(s) + noise, 0, max_weight); deterministic when `noise` is null.
  double act(const env::Observation& observation, OUNoise* noise);

  /// One optimizer step on mean squared TD error; returns the loss before the step.
  double critic_update(std::span<const Transition* const> batch);
  /// One ascent step on mean Q(s, actor(s)) with the critic held fixed; returns the objective.
  double actor_update(std::span<const Transition* const> batch);
  /// Mean Q(s, actor(s)); fills actor gradients of the *negated* objective.
  double actor_objective(const nn::Tensor2& states);
  /// TD targets y = r + gamma^steps Q'(s', actor'(s')) for non-terminal transitions.
  std::vector<double> td_targets(std::span<const Transition* const> batch);
  void soft_update_targets();

  Actor& actor() { return actor_; }
  Critic& critic() { return critic_; }
  Actor& target_actor() { return target_actor_; }
  Critic& target_critic() { return target_critic_; }
  const Actor& actor() const { return actor_; }
  const Critic& critic() const { return critic_; }
  const Actor& target_actor() const { return target_actor_; }
  const Critic& target_critic() const { return target_critic_; }
  const DdpgConfig& config() const { return config_; }

  /// Noise-free policy over a private copy of the current actor.
  std::function<double(const env::Observation&)> policy() const;

 private:
  DdpgConfig config_;
  Actor actor_;
  Critic critic_;
  Actor target_actor_;
  Critic target_critic_;
};

struct EpisodeMetrics {
  double reward_sum = 0.0;
  double final_wealth = 1.0;
  double mean_critic_loss = 0.0;
  double mean_actor_objective = 0.0;
  std::size_t updates = 0;
};

struct TrainResult {
  Agent agent;
  std::vector<EpisodeMetrics> curve;
};

/// Per step: act with OU noise, step, push; once the buffer holds a batch, one critic
/// update, one actor update and one soft update of both targets.
TrainResult train(env::MarketEnv& market, const DdpgConfig& config);

/// Actor, critic, both targets and their optimizer moments; the replay buffer is not saved.
void write_checkpoint(std::ostream& out, const Agent& agent, std::string_view manifest_hash);
/// Loads into an agent built with the same config; returns the manifest hash.
std::string read_checkpoint(std::istream& in, Agent& agent);

}  // namespace tidealloc::ddpg
