#include <algorithm>
#include <cmath>
#include <istream>
#include <memory>
#include <ostream>

#include "tidealloc/ddpg.hpp"
#include "tidealloc/log.hpp"

namespace tidealloc::ddpg {

void DdpgConfig::validate() const {
  if (!(gamma_td >= 0.0 && gamma_td < 1.0)) throw ValidationError("gamma_td must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in (0, 1]");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ValidationError("learning rates must be positive");
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (buffer_capacity < batch_size) throw ValidationError("buffer_capacity is smaller than batch_size");
  if (n_step == 0) throw ValidationError("n_step must be at least 1");
  if (max_weight != 1.0 && max_weight != 1.5) throw ValidationError("max_weight must be 1.0 or 1.5");
  if (projection_width == 0 || latent_width == 0 || critic_width == 0) {
    throw ValidationError("network widths must be positive");
  }
  if (!(ou_theta >= 0.0) || !(ou_sigma >= 0.0)) throw ValidationError("OU parameters must be >= 0");
}

Agent::Agent(const DdpgConfig& config, std::size_t observation_size)
    : config_(config),
      actor_(config.shape(observation_size), config.max_weight, config.seed),
      critic_(config.shape(observation_size), config.seed + 1),
      target_actor_(actor_),
      target_critic_(critic_) {
  config_.validate();
}

double Agent::act(const env::Observation& observation, OUNoise* noise) {
  nn::Tensor2 x(1, observation.size());
  std::copy(observation.values().begin(), observation.values().end(), x.data().begin());
  double w = actor_.forward(x)(0, 0);
  if (noise) w += noise->sample();
  return std::clamp(w, 0.0, config_.max_weight);
}

namespace {

nn::Tensor2 stack_batch(std::span<const Transition* const> batch, bool next) {
  std::vector<const env::Observation*> states;
  states.reserve(batch.size());
  for (const Transition* t : batch) states.push_back(next ? &t->next_state : &t->state);
  return stack_states(states);
}

}  // namespace

std::vector<double> Agent::td_targets(std::span<const Transition* const> batch) {
  std::vector<double> y(batch.size());
  std::vector<const Transition*> live;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i] = batch[i]->reward;
    if (!batch[i]->done) live.push_back(batch[i]);
  }
  if (live.empty() || config_.gamma_td == 0.0) return y;

  const nn::Tensor2 next = stack_batch(live, true);
  const nn::Tensor2 q = target_critic_.forward(next, target_actor_.forward(next));
  std::size_t j = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->done) continue;
    y[i] += std::pow(config_.gamma_td, static_cast<double>(batch[i]->steps)) * q(j++, 0);
  }
  return y;
}

double Agent::critic_update(std::span<const Transition* const> batch) {
  const std::vector<double> y = td_targets(batch);
  const nn::Tensor2 states = stack_batch(batch, false);
  nn::Tensor2 actions(batch.size(), 1);
  for (std::size_t i = 0; i < batch.size(); ++i) actions(i, 0) = batch[i]->action;

  const nn::Tensor2 q = critic_.forward(states, actions);
  const double b = static_cast<double>(batch.size());
  nn::Tensor2 grad(batch.size(), 1);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double e = q(i, 0) - y[i];
    loss += e * e;
    grad(i, 0) = 2.0 * e / b;
  }
  critic_.zero_grad();
  critic_.backward(grad);
  const nn::AdamConfig adam{.lr = config_.critic_lr};
  for (nn::ParameterSet* p : critic_.parameter_sets()) nn::optimizer_step(*p, adam);
  return loss / b;
}

double Agent::actor_objective(const nn::Tensor2& states) {
  actor_.params().zero_grad();
  const nn::Tensor2 a = actor_.forward(states);
  const nn::Tensor2 q = critic_.forward(states, a);
  const double b = static_cast<double>(states.rows());
  const double objective = q.mat().sum() / b;
  const nn::Tensor2 grad_a = critic_.backward(nn::Tensor2(states.rows(), 1, -1.0 / b));
  actor_.backward(grad_a);
  critic_.zero_grad();
  return objective;
}

double Agent::actor_update(std::span<const Transition* const> batch) {
  const double objective = actor_objective(stack_batch(batch, false));
  nn::optimizer_step(actor_.params(), nn::AdamConfig{.lr = config_.actor_lr});
  return objective;
}

void Agent::soft_update_targets() {
  soft_update(actor_.params(), target_actor_.params(), config_.tau);
  const auto online = critic_.parameter_sets();
  const auto target = target_critic_.parameter_sets();
  for (std::size_t i = 0; i < online.size(); ++i) soft_update(*online[i], *target[i], config_.tau);
}

std::function<double(const env::Observation&)> Agent::policy() const {
  auto actor = std::make_shared<Actor>(actor_);
  const double max_weight = config_.max_weight;
  return [actor, max_weight](const env::Observation& obs) {
    nn::Tensor2 x(1, obs.size());
    std::copy(obs.values().begin(), obs.values().end(), x.data().begin());
    return std::clamp(actor->forward(x)(0, 0), 0.0, max_weight);
  };
}

TrainResult train(env::MarketEnv& market, const DdpgConfig& config) {
  config.validate();
  if (market.config().max_weight != config.max_weight) {
    throw ValidationError("DDPG max_weight differs from the environment's");
  }
  TrainResult result{Agent(config, env::Observation::size_for(market.config().window)), {}};
  Agent& agent = result.agent;
  ReplayBuffer buffer(config.buffer_capacity, config.n_step, config.gamma_td);
  OUNoise noise(config.ou_theta, config.ou_sigma * config.max_weight, 0.0,
                config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 rng(config.seed + 17);

  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    EpisodeMetrics m;
    env::Observation obs = market.reset();
    noise.reset();
    while (!market.done()) {
      const double a = agent.act(obs, &noise);
      env::StepOutcome out = market.step(a);
      m.reward_sum += out.reward;
      buffer.push(obs, a, out.reward, out.next_observation ? &*out.next_observation : nullptr,
                  out.done);
      if (buffer.size() >= config.batch_size) {
        const auto batch = buffer.sample(config.batch_size, rng);
        m.mean_critic_loss += agent.critic_update(batch);
        m.mean_actor_objective += agent.actor_update(batch);
        agent.soft_update_targets();
        ++m.updates;
      }
      if (!out.done) obs = std::move(*out.next_observation);
    }
    m.final_wealth = market.wealth();
    if (m.updates > 0) {
      m.mean_critic_loss /= static_cast<double>(m.updates);
      m.mean_actor_objective /= static_cast<double>(m.updates);
    }
    log_info("ddpg episode " + std::to_string(episode + 1) + "/" + std::to_string(config.episodes) +
             " reward=" + format_double(m.reward_sum) + " critic_loss=" +
             format_double(m.mean_critic_loss));
    result.curve.push_back(m);
  }
  return result;
}

namespace {

constexpr std::string_view kSets[] = {"actor",         "critic.encoder",        "critic.head",
                                      "target_actor",  "target_critic.encoder", "target_critic.head"};

}  // namespace

void write_checkpoint(std::ostream& out, const Agent& agent, std::string_view manifest_hash) {
  nn::write_params_header(out, manifest_hash);
  nn::write_parameters(out, kSets[0], agent.actor().params());
  nn::write_parameters(out, kSets[1], *agent.critic().parameter_sets()[0]);
  nn::write_parameters(out, kSets[2], *agent.critic().parameter_sets()[1]);
  nn::write_parameters(out, kSets[3], agent.target_actor().params());
  nn::write_parameters(out, kSets[4], *agent.target_critic().parameter_sets()[0]);
  nn::write_parameters(out, kSets[5], *agent.target_critic().parameter_sets()[1]);
}

std::string read_checkpoint(std::istream& in, Agent& agent) {
  std::string hash = nn::read_params_header(in);
  nn::read_parameters(in, kSets[0], agent.actor().params());
  nn::read_parameters(in, kSets[1], *agent.critic().parameter_sets()[0]);
  nn::read_parameters(in, kSets[2], *agent.critic().parameter_sets()[1]);
  nn::read_parameters(in, kSets[3], agent.target_actor().params());
  nn::read_parameters(in, kSets[4], *agent.target_critic().parameter_sets()[0]);
  nn::read_parameters(in, kSets[5], *agent.target_critic().parameter_sets()[1]);
  return hash;
}

}  // namespace tidealloc::ddpg
