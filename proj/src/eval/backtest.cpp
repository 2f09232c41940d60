#include <cmath>
#include <limits>
#include <numeric>

#include "tidealloc/evaluation.hpp"

namespace tidealloc::eval {

Policy constant_policy(double weight) {
  return [weight](const env::Observation&) { return weight; };
}

std::string_view to_string(SharpeConvention convention) {
  return convention == SharpeConvention::raw ? "raw" : "annualized";
}

SharpeConvention sharpe_convention_from_string(std::string_view text) {
  if (text == "raw") return SharpeConvention::raw;
  if (text == "annualized") return SharpeConvention::annualized;
  throw ValidationError("unknown Sharpe convention '" + std::string(text) + "'");
}

double window_sharpe(std::span<const double> excess, SharpeConvention convention) {
  if (excess.size() < 2) throw std::invalid_argument("window_sharpe: need at least 2 values");
  const double n = static_cast<double>(excess.size());
  const double mean = std::accumulate(excess.begin(), excess.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : excess) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd < kSharpeStdFloor) return 0.0;
  const double s = mean / sd;
  return convention == SharpeConvention::annualized ? s * std::sqrt(12.0) : s;
}

std::vector<double> rolling_sharpe(std::span<const double> excess, std::size_t window,
                                   SharpeConvention convention) {
  if (window < 2) throw ValidationError("Sharpe window must be at least 2");
  std::vector<double> out;
  for (std::size_t end = window; end <= excess.size(); ++end) {
    out.push_back(window_sharpe(excess.subspan(end - window, window), convention));
  }
  return out;
}

BacktestReport run_backtest(const Policy& policy, std::string name, const data::DatasetSplit& split,
                            const env::EnvConfig& config, SharpeConvention convention) {
  BacktestReport report;
  report.policy = std::move(name);
  report.split = split.name;
  report.max_weight = config.max_weight;
  report.convention = convention;

  env::MarketEnv market(split, config);
  env::Observation obs = market.reset();
  while (!market.done()) {
    const double w = policy(obs);
    const data::MonthlyRecord& rec = market.current_record();
    env::StepOutcome out = market.step(w);
    report.months.push_back({rec.date, w, rec.mkt_return, rec.rf, out.portfolio_return, out.reward,
                             out.wealth});
    if (!out.done) obs = std::move(*out.next_observation);
  }

  std::vector<double> excess;
  excess.reserve(report.months.size());
  for (const MonthRow& m : report.months) excess.push_back(m.excess_return());
  report.rolling_sharpe = rolling_sharpe(excess, kSharpeWindow, convention);
  report.log_utility = log_utility(report);
  report.portfolio_value = portfolio_value(report);
  if (!report.rolling_sharpe.empty()) {
    report.average_sharpe =
        std::accumulate(report.rolling_sharpe.begin(), report.rolling_sharpe.end(), 0.0) /
        static_cast<double>(report.rolling_sharpe.size());
  }
  return report;
}

double log_utility(const BacktestReport& report) {
  double s = 0.0;
  for (const MonthRow& m : report.months) s += m.reward;
  return s;
}

double portfolio_value(const BacktestReport& report) {
  return report.months.empty() ? 1.0 : report.months.back().wealth;
}

Comparison compare(std::span<const BacktestReport> reports) {
  if (reports.empty()) throw ValidationError("compare: no reports");
  const BacktestReport& first = reports.front();
  Comparison c;
  c.split = first.split;
  c.convention = first.convention;
  for (const MonthRow& m : first.months) c.dates.push_back(m.date);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const BacktestReport& r : reports) {
    if (r.split != first.split) {
      throw ValidationError("compare: report '" + r.policy + "' is on split " +
                            std::string(data::to_string(r.split)) + ", expected " +
                            std::string(data::to_string(first.split)));
    }
    if (r.convention != first.convention) throw ValidationError("compare: mixed Sharpe conventions");
    if (r.months.size() != c.dates.size()) throw ValidationError("compare: reports differ in length");
    std::vector<double> wealth, sharpe, weights;
    for (std::size_t i = 0; i < r.months.size(); ++i) {
      if (!(r.months[i].date == c.dates[i])) throw ValidationError("compare: report dates differ");
      wealth.push_back(r.months[i].wealth);
      weights.push_back(r.months[i].weight);
      sharpe.push_back(i + 1 >= kSharpeWindow ? r.rolling_sharpe[i + 1 - kSharpeWindow] : nan);
    }
    c.policies.push_back(r.policy);
    c.wealth.push_back(std::move(wealth));
    c.sharpe.push_back(std::move(sharpe));
    c.weights.push_back(std::move(weights));
    c.summary.push_back({r.policy, r.log_utility, r.portfolio_value, r.average_sharpe});
  }
  return c;
}

}  // namespace tidealloc::eval
