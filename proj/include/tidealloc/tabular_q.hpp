#pragma once

// Tabular Q-learning over K-means market states and a discrete weight grid.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "tidealloc/env.hpp"

namespace tidealloc::qlearn {

inline constexpr std::size_t kDefaultClusters = 50;
inline constexpr std::size_t kMaxKmeansIterations = 300;

struct Centroids {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // k x dim, row-major
  std::uint64_t seed = 0;
  double inertia = 0.0;        // sum of squared distances at the final assignment
  std::size_t iterations = 0;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
};

/// Lloyd's iterations from a seeded k-means++ start, until the assignment stops changing
/// or 300 iterations. `points` is n x dim, row-major. Throws DataError when fewer than k
/// distinct points exist.
Centroids fit_kmeans(std::span<const double> points, std::size_t dim, std::size_t k,
                     std::uint64_t seed);

/// Nearest centroid by Euclidean distance; ties go to the lowest index.
std::size_t assign_cluster(std::span<const double> x, const Centroids& centroids);

class ActionGrid {
 public:
  explicit ActionGrid(std::vector<double> weights);
  /// {0.0, 0.1, ..., 1.0}
  static ActionGrid unlevered();
  /// {0.0, 0.15, ..., 1.5}
  static ActionGrid levered();
  static ActionGrid for_max_weight(double max_weight);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }
  double max_weight() const { return weights_.back(); }

 private:
  std::vector<double> weights_;
};

class QTable {
 public:
  QTable() = default;
  QTable(std::size_t states, std::size_t actions);

  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }

  double& value(std::size_t s, std::size_t a) { return values_[s * actions_ + a]; }
  double value(std::size_t s, std::size_t a) const { return values_[s * actions_ + a]; }
  std::uint64_t visits(std::size_t s, std::size_t a) const { return visits_[s * actions_ + a]; }
  void add_visit(std::size_t s, std::size_t a) { ++visits_[s * actions_ + a]; }
  void set_visits(std::size_t s, std::size_t a, std::uint64_t n) { visits_[s * actions_ + a] = n; }

  double max_value(std::size_t s) const;
  /// Lowest index among the maximizing actions.
  std::size_t argmax(std::size_t s) const;

  bool operator==(const QTable&) const = default;

 private:
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::vector<double> values_;
  std::vector<std::uint64_t> visits_;
};

/// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)); a terminal next state (nullopt)
/// contributes no bootstrap term. Increments the visit count and returns the new value.
double q_update(QTable& table, std::size_t s, std::size_t a, double r,
                std::optional<std::size_t> s_next, double alpha, double gamma_td);

/// Epsilon-greedy: uniform action with probability epsilon, else argmax (lowest index on ties).
std::size_t select_action(const QTable& table, std::size_t s, double epsilon,
                          std::mt19937_64& rng);

struct QConfig {
  double alpha = 0.1;
  /// Per-cell learning rate alpha / (1 + visits)^alpha_decay; 0 keeps alpha constant.
  double alpha_decay = 0.0;
  double gamma_td = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay = 0.97;  // multiplicative, per episode
  std::size_t episodes = 200;
  std::uint64_t seed = 1;

  void validate() const;
  double epsilon_at(std::size_t episode) const;
  double alpha_for(std::uint64_t visits) const;
};

struct DiscreteStep {
  double reward = 0.0;
  std::size_t next_state = 0;
  bool terminal = false;   // no bootstrap from next_state
  bool truncated = false;  // episode over, but next_state still bootstraps
};

/// Anything Q-learning can train on: finite states and actions, episodic.
template <typename E>
concept DiscreteEnvironment = requires(E env, std::size_t a) {
  { env.state_count() } -> std::convertible_to<std::size_t>;
  { env.action_count() } -> std::convertible_to<std::size_t>;
  { env.reset() } -> std::convertible_to<std::size_t>;
  { env.step(a) } -> std::same_as<DiscreteStep>;
};

struct TrainResult {
  QTable table;
  std::vector<double> episode_returns;  // undiscounted reward sum per episode
};

/// Runs `config.episodes` episodes of epsilon-greedy Q-learning with one update per step.
template <DiscreteEnvironment Env>
TrainResult train_discrete(Env& env, const QConfig& config) {
  config.validate();
  TrainResult result{QTable(env.state_count(), env.action_count()), {}};
  std::mt19937_64 rng(config.seed);
  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    const double epsilon = config.epsilon_at(episode);
    std::size_t s = env.reset();
    double total = 0.0;
    for (;;) {
      const std::size_t a = select_action(result.table, s, epsilon, rng);
      const DiscreteStep step = env.step(a);
      total += step.reward;
      const double alpha = config.alpha_for(result.table.visits(s, a));
      q_update(result.table, s, a, step.reward,
               step.terminal ? std::nullopt : std::optional<std::size_t>(step.next_state),
               alpha, config.gamma_td);
      if (step.terminal || step.truncated) break;
      s = step.next_state;
    }
    result.episode_returns.push_back(total);
  }
  return result;
}

/// Market environment seen through cluster labels and a weight grid.
class ClusteredMarketEnv {
 public:
  ClusteredMarketEnv(env::MarketEnv& market, const Centroids& centroids, const ActionGrid& grid);

  std::size_t state_count() const { return centroids_->k; }
  std::size_t action_count() const { return grid_->size(); }
  std::size_t reset();
  DiscreteStep step(std::size_t action);

 private:
  env::MarketEnv* market_;
  const Centroids* centroids_;
  const ActionGrid* grid_;
};

/// Current-month (latest) standardized features of every train record, n x 18 row-major.
std::vector<double> clustering_points(const data::DatasetSplit& split);

TrainResult train(env::MarketEnv& market, const Centroids& centroids, const ActionGrid& grid,
                  const QConfig& config);

using Policy = std::function<double(const env::Observation&)>;

/// weight = grid[argmax_a Q(cluster(obs), a)], no exploration. Copies its inputs.
Policy greedy_policy(const QTable& table, const Centroids& centroids, const ActionGrid& grid);

// Checkpoint: "# tidealloc-qtable v1 manifest=<hash>", then centroids and table sections.
void write_checkpoint(std::ostream& out, const Centroids& centroids, const ActionGrid& grid,
                      const QTable& table, std::string_view manifest_hash);

struct Checkpoint {
  Centroids centroids;
  ActionGrid grid{{0.0, 1.0}};
  QTable table;
  std::string manifest_hash;
};
Checkpoint read_checkpoint(std::istream& in);

}  // namespace tidealloc::qlearn
