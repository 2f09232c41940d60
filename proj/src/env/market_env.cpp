#include <cmath>
#include <string>

#include "tidealloc/env.hpp"

namespace tidealloc::env {

void EnvConfig::validate() const {
  if (max_weight != 1.0 && max_weight != 1.5) {
    throw ValidationError("max_weight must be 1.0 or 1.5, got " + format_double(max_weight));
  }
  if (window == 0) throw ValidationError("window must be >= 1");
  if (!std::isfinite(gamma_reward) || gamma_reward <= 0.0) {
    throw ValidationError("gamma_reward must be positive");
  }
}

Observation::Observation(std::size_t window, std::vector<double> values)
    : window_(window), values_(std::move(values)) {
  if (values_.size() != size_for(window_)) {
    throw std::invalid_argument("observation: expected " + std::to_string(size_for(window_)) +
                                " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw NumericError("observation: non-finite value");
  }
}

double portfolio_return(double weight, double mkt_return, double rf) {
  return weight * mkt_return + (1.0 - weight) * rf;
}

double reward(double portfolio_return, double gamma_reward) {
  const double gross = 1.0 + portfolio_return;
  if (!(gross > 0.0)) {
    throw RuinError("portfolio return " + format_double(portfolio_return) +
                    " wipes out wealth; log reward undefined");
  }
  return gamma_reward * std::log(gross);
}

double crra_utility(double wealth, double risk_aversion) {
  if (!(wealth > 0.0)) throw std::domain_error("crra_utility: wealth must be positive");
  if (!(risk_aversion > 0.0 && risk_aversion < 1.0)) {
    throw std::domain_error("crra_utility: risk aversion must lie in (0, 1)");
  }
  const double e = 1.0 - risk_aversion;
  return std::pow(wealth, e) / e;
}

double kelly_fraction(double mu, double rf, double sigma_sq, double risk_aversion) {
  if (!(sigma_sq > 0.0)) throw std::domain_error("kelly_fraction: variance must be positive");
  if (!(risk_aversion > 0.0)) throw std::domain_error("kelly_fraction: risk aversion must be positive");
  return (mu - rf) / (risk_aversion * sigma_sq);
}

MarketEnv::MarketEnv(const data::DatasetSplit& split, EnvConfig config)
    : split_(&split), config_(config) {
  config_.validate();
  log_returns_.reserve(split.records.size());
  for (const auto& rec : split.records) {
    if (!(1.0 + rec.mkt_return > 0.0)) throw DataError("market return <= -100% in " + rec.date.str());
    log_returns_.push_back(std::log1p(rec.mkt_return));
  }
}

Observation MarketEnv::observation_at(std::size_t index) const {
  const std::size_t w = config_.window;
  if (index < w || index > split_->records.size()) {
    throw std::out_of_range("observation_at: index without full history");
  }
  std::vector<double> values;
  values.reserve(Observation::size_for(w));
  for (std::size_t i = index - w; i < index; ++i) {
    const auto& f = split_->records[i].features;
    values.insert(values.end(), f.begin(), f.end());
  }
  for (std::size_t i = index - w; i < index; ++i) values.push_back(log_returns_[i]);
  return Observation(w, std::move(values));
}

Observation MarketEnv::reset() {
  if (split_->records.size() < config_.window + 1) {
    throw DataError("split " + std::string(data::to_string(split_->name)) + " has " +
                    std::to_string(split_->records.size()) + " months; need at least " +
                    std::to_string(config_.window + 1));
  }
  cursor_ = config_.window;
  wealth_ = 1.0;
  active_ = true;
  done_ = false;
  return observation_at(cursor_);
}

StepOutcome MarketEnv::step(double weight) {
  if (!active_) throw ProtocolError(done_ ? "step after episode end" : "step before reset");
  if (!(weight >= 0.0 && weight <= config_.max_weight)) {
    throw ProtocolError("weight " + format_double(weight) + " outside [0, " +
                        format_double(config_.max_weight) + "]");
  }
  const auto& rec = split_->records[cursor_];
  StepOutcome out;
  out.portfolio_return = portfolio_return(weight, rec.mkt_return, rec.rf);
  try {
    out.reward = reward(out.portfolio_return, config_.gamma_reward);
  } catch (const RuinError& e) {
    active_ = false;
    done_ = true;
    throw RuinError(std::string(e.what()) + " (" + rec.date.str() + ")");
  }
  wealth_ *= 1.0 + out.portfolio_return;
  out.wealth = wealth_;
  ++cursor_;
  if (cursor_ == split_->records.size()) {
    out.done = true;
    done_ = true;
    active_ = false;
  } else {
    out.next_observation = observation_at(cursor_);
  }
  return out;
}

}  // namespace tidealloc::env
