#pragma once

// Two-asset allocation MDP: market index vs. risk-free asset, log-return (Kelly) rewards.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tidealloc/data.hpp"

namespace tidealloc::env {

inline constexpr std::size_t kDefaultWindow = 12;

struct EnvConfig {
  double max_weight = 1.0;    // 1.0, or 1.5 with leverage
  double gamma_reward = 1.0;  // reward multiplier; 1 keeps sum(rewards) == ln(wealth)
  std::size_t window = kDefaultWindow;

  /// Throws ValidationError when max_weight is not 1.0/1.5 or window is zero.
  void validate() const;
};

/// Agent state before deciding month t: features of months t-window..t-1 (oldest first)
/// followed by ln(1 + market return) of the same months.
class Observation {
 public:
  Observation() = default;
  Observation(std::size_t window, std::vector<double> values);

  static std::size_t size_for(std::size_t window) {
    return window * (data::kFeatureCount + 1);
  }

  std::size_t window() const { return window_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double feature(std::size_t month, std::size_t slot) const {
    return values_[month * data::kFeatureCount + slot];
  }
  double log_return(std::size_t month) const {
    return values_[window_ * data::kFeatureCount + month];
  }
  /// The most recent month's 18 features (last row of the window).
  std::span<const double> latest_features() const {
    return std::span<const double>(values_).subspan((window_ - 1) * data::kFeatureCount,
                                                    data::kFeatureCount);
  }

  bool operator==(const Observation&) const = default;

 private:
  std::size_t window_ = 0;
  std::vector<double> values_;
};

struct StepOutcome {
  std::optional<Observation> next_observation;  // empty once done
  double reward = 0.0;
  double portfolio_return = 0.0;
  double wealth = 1.0;
  bool done = false;
};

/// w * mkt + (1 - w) * rf; for w > 1 the second term is borrowing at the risk-free rate.
double portfolio_return(double weight, double mkt_return, double rf);

/// gamma * ln(1 + r). Throws RuinError when 1 + r <= 0.
double reward(double portfolio_return, double gamma_reward);

/// W^(1 - R) / (1 - R), defined for W > 0 and 0 < R < 1.
double crra_utility(double wealth, double risk_aversion);

/// Closed-form optimal risky fraction (mu - rf) / (R * sigma^2), unclamped.
double kelly_fraction(double mu, double rf, double sigma_sq, double risk_aversion);

/// Single-threaded episode over one split. The split must outlive the environment.
class MarketEnv {
 public:
  MarketEnv(const data::DatasetSplit& split, EnvConfig config);

  /// Starts an episode at the first month with a full window of history; wealth = 1.
  Observation reset();

  /// Applies `weight` to the current month's returns and advances one month.
  StepOutcome step(double weight);

  bool done() const { return done_; }
  double wealth() const { return wealth_; }
  const EnvConfig& config() const { return config_; }
  const data::DatasetSplit& split() const { return *split_; }

  /// Month the next step() will earn.
  const data::MonthlyRecord& current_record() const { return split_->records[cursor_]; }
  std::size_t first_decision_index() const { return config_.window; }
  /// Number of steps in a full episode.
  std::size_t episode_length() const { return split_->records.size() - config_.window; }

  /// Observation for deciding month `index` of the split (index >= window).
  Observation observation_at(std::size_t index) const;

 private:
  const data::DatasetSplit* split_;
  EnvConfig config_;
  std::vector<double> log_returns_;
  std::size_t cursor_ = 0;
  double wealth_ = 1.0;
  bool active_ = false;
  bool done_ = false;
};

struct SyntheticMarketSpec {
  double mu = 0.008;     // monthly mean market return
  double sigma = 0.045;  // monthly return volatility
  double rf = 0.002;     // constant monthly risk-free return
};

/// i.i.d. Gaussian market. Features are standardized trailing statistics of the generated
/// series (see synthetic.cpp); `months` records are returned after a 12-month burn-in.
data::DatasetSplit synthetic_market(const SyntheticMarketSpec& spec, std::size_t months,
                                    std::uint64_t seed,
                                    data::SplitName name = data::SplitName::train);

}  // namespace tidealloc::env
