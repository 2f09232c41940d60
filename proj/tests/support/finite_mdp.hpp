#pragma once

// Small MDPs with explicit transition tables, a value-iteration oracle and an environment
// adapter for the Q-learning trainer.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "tidealloc/tabular_q.hpp"

namespace fixtures {

struct FiniteMdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  // p[s][a][s'] and deterministic r[s][a]
  std::vector<std::vector<std::vector<double>>> p;
  std::vector<std::vector<double>> r;
  double gamma = 0.9;
};

struct OracleSolution {
  std::vector<std::vector<double>> q;
  std::vector<std::size_t> policy;  // lowest index on ties
  double min_gap = 0.0;             // smallest best-vs-second action gap over states
};

inline OracleSolution value_iteration(const FiniteMdp& m, double tol = 1e-12) {
  std::vector<double> v(m.states, 0.0);
  OracleSolution sol;
  sol.q.assign(m.states, std::vector<double>(m.actions, 0.0));
  for (int iter = 0; iter < 100000; ++iter) {
    double delta = 0.0;
    for (std::size_t s = 0; s < m.states; ++s) {
      for (std::size_t a = 0; a < m.actions; ++a) {
        double next = 0.0;
        for (std::size_t t = 0; t < m.states; ++t) next += m.p[s][a][t] * v[t];
        sol.q[s][a] = m.r[s][a] + m.gamma * next;
      }
    }
    for (std::size_t s = 0; s < m.states; ++s) {
      const double best = *std::max_element(sol.q[s].begin(), sol.q[s].end());
      delta = std::max(delta, std::abs(best - v[s]));
      v[s] = best;
    }
    if (delta < tol) break;
  }
  sol.min_gap = 1e300;
  for (std::size_t s = 0; s < m.states; ++s) {
    const auto& row = sol.q[s];
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    sol.policy.push_back(best);
    for (std::size_t a = 0; a < m.actions; ++a) {
      if (a != best) sol.min_gap = std::min(sol.min_gap, row[best] - row[a]);
    }
  }
  return sol;
}

/// Random MDP with rewards in [-1, 1] and Dirichlet-like transition rows, or one-hot rows
/// when `deterministic`.
inline FiniteMdp random_mdp(std::size_t states, std::size_t actions, double gamma,
                            std::uint64_t seed, bool deterministic = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FiniteMdp m;
  m.states = states;
  m.actions = actions;
  m.gamma = gamma;
  m.p.assign(states, std::vector<std::vector<double>>(actions, std::vector<double>(states)));
  m.r.assign(states, std::vector<double>(actions));
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t a = 0; a < actions; ++a) {
      m.r[s][a] = 2.0 * u(rng) - 1.0;
      double total = 0.0;
      for (auto& x : m.p[s][a]) {
        x = -std::log(1.0 - u(rng));
        total += x;
      }
      for (auto& x : m.p[s][a]) x /= total;
      if (deterministic) {
        const auto hot = std::uniform_int_distribution<std::size_t>(0, states - 1)(rng);
        for (std::size_t t = 0; t < states; ++t) m.p[s][a][t] = t == hot ? 1.0 : 0.0;
      }
    }
  }
  return m;
}

/// Episodes start in a uniformly drawn state and are cut after `horizon` steps; the cut is
/// a truncation, so the last step still bootstraps.
class FiniteMdpEnv {
 public:
  FiniteMdpEnv(const FiniteMdp& mdp, std::size_t horizon, std::uint64_t seed)
      : mdp_(&mdp), horizon_(horizon), rng_(seed) {}

  std::size_t state_count() const { return mdp_->states; }
  std::size_t action_count() const { return mdp_->actions; }

  std::size_t reset() {
    steps_ = 0;
    state_ = std::uniform_int_distribution<std::size_t>(0, mdp_->states - 1)(rng_);
    return state_;
  }

  tidealloc::qlearn::DiscreteStep step(std::size_t a) {
    tidealloc::qlearn::DiscreteStep out;
    out.reward = mdp_->r[state_][a];
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    const auto& row = mdp_->p[state_][a];
    double acc = 0.0;
    std::size_t next = row.size() - 1;
    for (std::size_t t = 0; t < row.size(); ++t) {
      acc += row[t];
      if (u < acc) {
        next = t;
        break;
      }
    }
    state_ = next;
    out.next_state = next;
    out.truncated = ++steps_ >= horizon_;
    return out;
  }

 private:
  const FiniteMdp* mdp_;
  std::size_t horizon_;
  std::mt19937_64 rng_;
  std::size_t state_ = 0;
  std::size_t steps_ = 0;
};

}  // namespace fixtures
