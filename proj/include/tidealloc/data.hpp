#pragma once

// Source-file parsing, feature engineering, splitting and standardization of the
// monthly market dataset.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tidealloc/common.hpp"

namespace tidealloc::data {

inline constexpr int kDatasetVersion = 1;
inline constexpr std::size_t kFeatureCount = 18;
inline constexpr std::size_t kPredictorCount = 11;

inline constexpr int kFirstYear = 1927;
inline constexpr int kLastYear = 2019;
inline constexpr int kTrainLastYear = 1957;
inline constexpr int kValidationLastYear = 1988;

/// Feature slot order of MonthlyRecord::features. Changing it requires bumping kDatasetVersion.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "dp",          "ep",          "bm",          "ntis",       "tbl",        "tms",
    "dfy",         "infl",        "corpr",       "ltr",        "svar",       "lag_excess",
    "payout_lag1", "payout_lag2", "payout_lag3", "rvol_lag1",  "rvol_lag2",  "rvol_lag3"};

inline constexpr std::size_t kLagExcessSlot = 11;
inline constexpr std::size_t kPayoutLag1Slot = 12;
inline constexpr std::size_t kRealizedVolLag1Slot = 15;

struct RawMonthly {
  YearMonth date;
  double mkt_excess = 0.0;  // decimal
  double rf = 0.0;          // decimal
};

struct RawDaily {
  YearMonth month;
  int day = 1;
  double mkt_excess = 0.0;
  double rf = 0.0;
};

struct PredictorRow {
  YearMonth date;
  std::array<double, kPredictorCount> values{};  // NaN marks a missing value
};

struct MonthlyPoint {
  YearMonth date;
  double value = 0.0;
};

struct MonthlyRecord {
  YearMonth date;
  double mkt_return = 0.0;  // total market return, mkt_excess + rf
  double rf = 0.0;
  std::array<double, kFeatureCount> features{};

  double mkt_excess() const { return mkt_return - rf; }
};

struct StandardizationStats {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};   // population convention; 1 for degenerate slots
  std::array<bool, kFeatureCount> degenerate{};  // zero variance on train
};

enum class SplitName { train, validation, test };

std::string_view to_string(SplitName name);
SplitName split_from_string(std::string_view text);

struct DatasetSplit {
  SplitName name = SplitName::train;
  std::vector<MonthlyRecord> records;
  /// Shared by all three splits of one dataset; computed on train only.
  std::shared_ptr<const StandardizationStats> stats;
};

using SplitSet = std::array<DatasetSplit, 3>;  // train, validation, test

// --- parsing ---------------------------------------------------------------

/// Fama/French 3-factor monthly file. Percent values are converted to decimals and rows
/// outside [first_year, last_year] are dropped. Parsing stops at the annual section.
std::vector<RawMonthly> parse_factor_monthly(std::istream& in, int first_year = kFirstYear,
                                             int last_year = kLastYear);

/// Fama/French 3-factor daily file (YYYYMMDD keys). All rows are kept.
std::vector<RawDaily> parse_factor_daily(std::istream& in);

/// Goyal-Welch monthly predictor file. Derived predictors are built from the raw columns
/// (dp = ln D12 - ln Index, ep = ln E12 - ln Index, tms = lty - tbl, dfy = BAA - AAA)
/// unless the file already carries them.
std::vector<PredictorRow> parse_predictors(std::istream& in);

/// Two-or-more column monthly file whose first column is YYYYMM. When `column` is empty
/// the file must have exactly two columns.
std::vector<MonthlyPoint> parse_monthly_series(std::istream& in, std::string_view column = {});

// --- features --------------------------------------------------------------

/// Sum of squared daily returns.
double realized_squared_volatility(std::span<const double> daily_returns);

/// Realized variance per month from total (excess + rf) daily market returns.
std::vector<MonthlyPoint> monthly_realized_volatility(std::span<const RawDaily> daily);

/// Aligns all inputs on their common complete range and emits one record per month whose
/// lags (1..3 months) are available inside that range.
std::vector<MonthlyRecord> build_feature_table(std::span<const RawMonthly> raw,
                                               std::span<const PredictorRow> predictors,
                                               std::span<const MonthlyPoint> payout_yield,
                                               std::span<const MonthlyPoint> realized_vol);

/// Calendar-year split: train 1927-1957, validation 1958-1988, test 1989-2019.
SplitSet split_by_year(std::span<const MonthlyRecord> records);

/// Z-scores every split with train statistics. Degenerate (zero-variance) features use a
/// divisor of 1 and are reported through `warnings`.
SplitSet standardize(SplitSet splits, std::vector<std::string>* warnings = nullptr);

/// Feature vector in raw units, undoing standardization.
std::array<double, kFeatureCount> destandardize(const MonthlyRecord& record,
                                                const StandardizationStats& stats);

// --- dataset files ---------------------------------------------------------

void write_split(std::ostream& out, const DatasetSplit& split, std::string_view manifest_hash);
DatasetSplit read_split(std::istream& in, std::shared_ptr<const StandardizationStats> stats);

void write_stats(std::ostream& out, const StandardizationStats& stats,
                 std::string_view manifest_hash);
StandardizationStats read_stats(std::istream& in);

/// Manifest hash found in the versioned first line of a dataset file, if any.
std::optional<std::string> read_header_hash(std::istream& in);

struct PreparedData {
  std::shared_ptr<const StandardizationStats> stats;
  SplitSet splits;
  std::string fingerprint;  // manifest hash of the prepare run

  const DatasetSplit& split(SplitName name) const { return splits[static_cast<int>(name)]; }
};

std::filesystem::path split_path(const std::filesystem::path& dir, SplitName name);
std::filesystem::path stats_path(const std::filesystem::path& dir);

/// Loads the three split files and the stats file written by the prepare command. If
/// `only` is set, the other splits are left empty (used to keep test data untouched).
PreparedData load_prepared(const std::filesystem::path& dir,
                           std::span<const SplitName> only = {});

}  // namespace tidealloc::data
