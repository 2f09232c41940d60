#pragma once

// Backtests of frozen policies, the three summary metrics and report artifacts.

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tidealloc/env.hpp"

namespace tidealloc::eval {

using Policy = std::function<double(const env::Observation&)>;

Policy constant_policy(double weight);
/// Always fully invested in the market.
inline Policy buy_and_hold() { return constant_policy(1.0); }

enum class SharpeConvention { raw, annualized };
/// Calibrated on the buy-and-hold test backtest; see README.
inline constexpr SharpeConvention kDefaultSharpeConvention = SharpeConvention::annualized;
inline constexpr std::size_t kSharpeWindow = 12;
/// Windows whose excess-return std is below this score 0.
inline constexpr double kSharpeStdFloor = 1e-12;

std::string_view to_string(SharpeConvention convention);
SharpeConvention sharpe_convention_from_string(std::string_view text);

struct MonthRow {
  YearMonth date;
  double weight = 0.0;
  double mkt_return = 0.0;
  double rf = 0.0;
  double portfolio_return = 0.0;
  double reward = 0.0;
  double wealth = 1.0;  // after this month

  double excess_return() const { return portfolio_return - rf; }
};

struct BacktestReport {
  std::string policy;
  data::SplitName split = data::SplitName::test;
  double max_weight = 1.0;
  SharpeConvention convention = kDefaultSharpeConvention;
  std::vector<MonthRow> months;
  /// rolling_sharpe[i] belongs to months[i + kSharpeWindow - 1].
  std::vector<double> rolling_sharpe;
  double log_utility = 0.0;
  double portfolio_value = 1.0;
  double average_sharpe = 0.0;
};

/// Sharpe of one window: mean / sample std of the excess returns, 0 when the std is
/// below kSharpeStdFloor, times sqrt(12) when annualized.
double window_sharpe(std::span<const double> excess, SharpeConvention convention);

/// One value per full trailing window, oldest first. Empty when the series is shorter
/// than the window.
std::vector<double> rolling_sharpe(std::span<const double> excess, std::size_t window,
                                   SharpeConvention convention);

/// Single deterministic pass from wealth 1 over the split.
BacktestReport run_backtest(const Policy& policy, std::string name, const data::DatasetSplit& split,
                            const env::EnvConfig& config,
                            SharpeConvention convention = kDefaultSharpeConvention);

/// Sum of per-month rewards.
double log_utility(const BacktestReport& report);
/// Final wealth over initial wealth.
double portfolio_value(const BacktestReport& report);

struct SummaryRow {
  std::string policy;
  double log_utility = 0.0;
  double portfolio_value = 1.0;
  double average_sharpe = 0.0;
};

/// Date-aligned series of several reports on one split.
struct Comparison {
  data::SplitName split = data::SplitName::test;
  SharpeConvention convention = kDefaultSharpeConvention;
  std::vector<YearMonth> dates;
  std::vector<std::string> policies;
  std::vector<std::vector<double>> wealth;   // [policy][month]
  std::vector<std::vector<double>> sharpe;   // [policy][month], NaN before the first window
  std::vector<std::vector<double>> weights;  // [policy][month]
  std::vector<SummaryRow> summary;
};

/// Throws ValidationError when the reports come from different splits, dates or Sharpe
/// conventions, or when `reports` is empty.
Comparison compare(std::span<const BacktestReport> reports);

// --- files -------------------------------------------------------------------

/// "# tidealloc-report v1 policy=<name> split=<split> max_weight=<w> sharpe=<convention>
/// manifest=<hash>", then date,weight,mkt_return,rf,portfolio_return,reward,wealth,rolling_sharpe.
void write_report(std::ostream& out, const BacktestReport& report, std::string_view manifest_hash);
/// Recomputes the scalars from the rows. Returns the report; `manifest_hash` receives the hash.
BacktestReport read_report(std::istream& in, std::string* manifest_hash = nullptr);

/// "# tidealloc-summary v1 split=<split> sharpe=<convention> manifest=<hash>", then one row
/// per policy: policy,log_utility,portfolio_value,average_sharpe.
void write_summary(std::ostream& out, const Comparison& comparison, std::string_view manifest_hash);
/// Aligned figure data: date, then wealth/sharpe/weight columns per policy.
void write_comparison_series(std::ostream& out, const Comparison& comparison,
                             std::string_view manifest_hash);

enum class Figure { wealth, rolling_sharpe, weights };
std::string_view figure_file_name(Figure figure);
/// Static SVG line chart of one comparison series.
std::string render_figure(const Comparison& comparison, Figure figure, std::string_view manifest_hash);

}  // namespace tidealloc::eval
