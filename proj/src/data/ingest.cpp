#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>

#include "tidealloc/data.hpp"
#include "tidealloc/log.hpp"

namespace tidealloc::data {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool all_digits(std::string_view text) {
  return !text.empty() &&
         std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                       std::string_view name) {
  const std::string wanted = lower(name);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (lower(header[i]) == wanted) return i;
  }
  return std::nullopt;
}

/// Missing-value tokens used by the public predictor files.
bool is_missing_token(std::string_view text) {
  const std::string t = lower(trim(text));
  return t.empty() || t == "nan" || t == "na" || t == "." || t == "null";
}

double parse_value_or_nan(std::string field, std::size_t line) {
  if (is_missing_token(field)) return kNaN;
  // thousands separators inside quoted numbers, e.g. "1,234.5"
  field.erase(std::remove(field.begin(), field.end(), ','), field.end());
  double value = 0.0;
  if (!parse_double(field, value)) {
    throw ParseError("not a number: '" + field + "'", line);
  }
  return value;
}

struct FactorLayout {
  std::size_t mkt = 0;
  std::size_t rf = 0;
};

FactorLayout factor_layout(const std::vector<std::string>& header) {
  const auto mkt = find_column(header, "Mkt-RF");
  const auto rf = find_column(header, "RF");
  if (!mkt) throw SchemaError("factor file: missing required column Mkt-RF");
  if (!rf) throw SchemaError("factor file: missing required column RF");
  return {*mkt, *rf};
}

bool looks_like_factor_header(const std::vector<std::string>& fields) {
  return std::any_of(fields.begin(), fields.end(), [](const std::string& f) {
    const std::string l = lower(f);
    return l == "mkt-rf" || l == "rf";
  });
}

/// Shared reader for the monthly and daily factor layouts. Calls `on_row(date_digits,
/// mkt_excess_pct, rf_pct, line)` for every data row of the first section.
template <typename OnRow>
void read_factor_section(std::istream& in, std::size_t date_digits, OnRow&& on_row) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<FactorLayout> layout;
  bool in_rows = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_csv_line(line);
    if (!layout) {
      if (looks_like_factor_header(fields)) layout = factor_layout(fields);
      continue;
    }
    if (trim(line).empty()) {
      if (in_rows) break;
      continue;
    }
    const std::string& key = fields.front();
    if (!all_digits(key)) {
      if (!key.empty() && std::isdigit(static_cast<unsigned char>(key.front()))) {
        throw ParseError("malformed date '" + key + "'", lineno);
      }
      if (in_rows) break;  // start of the next section
      continue;
    }
    if (key.size() != date_digits) {
      if (in_rows && key.size() == 4) break;  // annual section
      throw ParseError("malformed date '" + key + "'", lineno);
    }
    const std::size_t needed = std::max(layout->mkt, layout->rf) + 1;
    if (fields.size() < needed) {
      throw ParseError("expected at least " + std::to_string(needed) + " fields", lineno);
    }
    double mkt = 0.0;
    double rf = 0.0;
    if (!parse_double(fields[layout->mkt], mkt) || !parse_double(fields[layout->rf], rf)) {
      throw ParseError("malformed factor values", lineno);
    }
    if (!std::isfinite(mkt) || !std::isfinite(rf)) {
      throw ParseError("non-finite factor value", lineno);
    }
    in_rows = true;
    on_row(std::stol(key), mkt, rf, lineno);
  }
  if (!layout) throw SchemaError("factor file: header with Mkt-RF and RF not found");
}

}  // namespace

std::string_view to_string(SplitName name) {
  switch (name) {
    case SplitName::train: return "train";
    case SplitName::validation: return "validation";
    case SplitName::test: return "test";
  }
  return "?";
}

SplitName split_from_string(std::string_view text) {
  if (text == "train") return SplitName::train;
  if (text == "validation") return SplitName::validation;
  if (text == "test") return SplitName::test;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

std::vector<RawMonthly> parse_factor_monthly(std::istream& in, int first_year, int last_year) {
  std::vector<RawMonthly> rows;
  std::optional<YearMonth> previous;
  read_factor_section(in, 6, [&](long key, double mkt, double rf, std::size_t line) {
    YearMonth date;
    try {
      date = YearMonth::from_yyyymm(key);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line);
    }
    if (previous && date.index() != previous->index() + 1) {
      throw ParseError("dates not contiguous after " + previous->str(), line);
    }
    previous = date;
    if (rf / 100.0 <= -1.0) throw ParseError("risk-free return <= -100%", line);
    if (date.year < first_year || date.year > last_year) return;
    rows.push_back({date, mkt / 100.0, rf / 100.0});
  });
  return rows;
}

std::vector<RawDaily> parse_factor_daily(std::istream& in) {
  std::vector<RawDaily> rows;
  long previous = 0;
  read_factor_section(in, 8, [&](long key, double mkt, double rf, std::size_t line) {
    if (key <= previous) throw ParseError("daily dates not increasing", line);
    previous = key;
    RawDaily row;
    try {
      row.month = YearMonth::from_yyyymm(key / 100);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line);
    }
    row.day = static_cast<int>(key % 100);
    if (row.day < 1 || row.day > 31) throw ParseError("invalid day in date", line);
    row.mkt_excess = mkt / 100.0;
    row.rf = rf / 100.0;
    rows.push_back(row);
  });
  return rows;
}

std::vector<PredictorRow> parse_predictors(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) header = split_csv_line(line);
  }
  if (header.empty()) throw SchemaError("predictor file: empty");

  const auto date_col = find_column(header, "yyyymm");
  if (!date_col) throw SchemaError("predictor file: missing required column yyyymm");

  // Each predictor is either read directly or derived from raw columns.
  struct Source {
    std::optional<std::size_t> direct;
    std::vector<std::size_t> raw;
  };
  std::array<Source, kPredictorCount> sources;
  std::vector<std::string> missing;
  auto direct_or = [&](std::size_t slot, std::initializer_list<std::string_view> direct_names,
                       std::initializer_list<std::string_view> raw_names) {
    for (auto name : direct_names) {
      if (auto col = find_column(header, name)) {
        sources[slot].direct = col;
        return;
      }
    }
    for (auto name : raw_names) {
      auto col = find_column(header, name);
      if (!col) {
        missing.emplace_back(name);
        return;
      }
      sources[slot].raw.push_back(*col);
    }
    if (raw_names.size() == 0) missing.emplace_back(*direct_names.begin());
  };
  direct_or(0, {"dp"}, {"D12", "Index"});
  direct_or(1, {"ep"}, {"E12", "Index"});
  direct_or(2, {"bm", "b/m"}, {});
  direct_or(3, {"ntis"}, {});
  direct_or(4, {"tbl"}, {});
  direct_or(5, {"tms"}, {"lty", "tbl"});
  direct_or(6, {"dfy"}, {"BAA", "AAA"});
  direct_or(7, {"infl"}, {});
  direct_or(8, {"corpr"}, {});
  direct_or(9, {"ltr"}, {});
  direct_or(10, {"svar"}, {});
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw SchemaError("predictor file: missing required column(s) " + list);
  }

  std::vector<PredictorRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields", lineno);
    }
    PredictorRow row;
    const std::string& key = fields[*date_col];
    if (!all_digits(key) || key.size() != 6) throw ParseError("malformed date '" + key + "'", lineno);
    try {
      row.date = YearMonth::from_yyyymm(std::stol(key));
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), lineno);
    }
    auto value = [&](std::size_t col) { return parse_value_or_nan(fields[col], lineno); };
    for (std::size_t slot = 0; slot < kPredictorCount; ++slot) {
      const Source& src = sources[slot];
      if (src.direct) {
        row.values[slot] = value(*src.direct);
        continue;
      }
      const double a = value(src.raw[0]);
      const double b = value(src.raw[1]);
      if (slot == 0 || slot == 1) {
        row.values[slot] = (a > 0.0 && b > 0.0) ? std::log(a) - std::log(b) : kNaN;
      } else {
        row.values[slot] = a - b;
      }
    }
    if (!rows.empty() && row.date <= rows.back().date) {
      throw ParseError("dates not increasing", lineno);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<MonthlyPoint> parse_monthly_series(std::istream& in, std::string_view column) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) header = split_csv_line(line);
  }
  if (header.empty()) throw SchemaError("monthly series file: empty");
  std::size_t value_col = 1;
  if (column.empty()) {
    if (header.size() != 2) {
      throw SchemaError("monthly series file has " + std::to_string(header.size()) +
                        " columns; name the value column explicitly");
    }
  } else {
    auto col = find_column(header, column);
    if (!col) throw SchemaError("monthly series file: missing required column " + std::string(column));
    value_col = *col;
  }

  std::vector<MonthlyPoint> points;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() <= value_col) throw ParseError("too few fields", lineno);
    const std::string& key = fields[0];
    if (!all_digits(key) || key.size() != 6) throw ParseError("malformed date '" + key + "'", lineno);
    MonthlyPoint p;
    try {
      p.date = YearMonth::from_yyyymm(std::stol(key));
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), lineno);
    }
    p.value = parse_value_or_nan(fields[value_col], lineno);
    if (!points.empty() && p.date <= points.back().date) {
      throw ParseError("dates not increasing", lineno);
    }
    points.push_back(p);
  }
  return points;
}

double realized_squared_volatility(std::span<const double> daily_returns) {
  if (daily_returns.empty()) {
    throw DataError("realized volatility: month without daily observations");
  }
  double sum = 0.0;
  for (double r : daily_returns) sum += r * r;
  return sum;
}

std::vector<MonthlyPoint> monthly_realized_volatility(std::span<const RawDaily> daily) {
  std::vector<MonthlyPoint> out;
  std::vector<double> month_returns;
  for (std::size_t i = 0; i < daily.size(); ++i) {
    month_returns.push_back(daily[i].mkt_excess + daily[i].rf);
    const bool last_of_month = i + 1 == daily.size() || daily[i + 1].month != daily[i].month;
    if (last_of_month) {
      out.push_back({daily[i].month, realized_squared_volatility(month_returns)});
      month_returns.clear();
    }
  }
  return out;
}

std::vector<MonthlyRecord> build_feature_table(std::span<const RawMonthly> raw,
                                               std::span<const PredictorRow> predictors,
                                               std::span<const MonthlyPoint> payout_yield,
                                               std::span<const MonthlyPoint> realized_vol) {
  // Index every input by month; a month is "complete" when all its values are finite.
  std::map<int, const RawMonthly*> raw_by;
  for (const auto& r : raw) raw_by[r.date.index()] = &r;
  std::map<int, const PredictorRow*> pred_by;
  for (const auto& p : predictors) {
    if (std::all_of(p.values.begin(), p.values.end(), [](double v) { return std::isfinite(v); })) {
      pred_by[p.date.index()] = &p;
    }
  }
  auto complete_points = [](std::span<const MonthlyPoint> pts) {
    std::map<int, double> m;
    for (const auto& p : pts) {
      if (std::isfinite(p.value)) m[p.date.index()] = p.value;
    }
    return m;
  };
  const auto payout_by = complete_points(payout_yield);
  const auto rvol_by = complete_points(realized_vol);

  if (raw_by.empty() || pred_by.empty() || payout_by.empty() || rvol_by.empty()) {
    throw AlignmentError("feature table: an input has no complete months");
  }
  const int start = std::max({raw_by.begin()->first, pred_by.begin()->first,
                              payout_by.begin()->first, rvol_by.begin()->first});
  const int end = std::min({raw_by.rbegin()->first, pred_by.rbegin()->first,
                            payout_by.rbegin()->first, rvol_by.rbegin()->first});
  if (end - start < 3) {
    throw AlignmentError("feature table: inputs overlap on fewer than 4 months");
  }

  std::vector<std::string> gaps;
  for (int m = start; m <= end; ++m) {
    const std::string when = YearMonth::from_index(m).str();
    if (!raw_by.count(m)) gaps.push_back("market " + when);
    if (!pred_by.count(m)) gaps.push_back("predictors " + when);
    if (!payout_by.count(m)) gaps.push_back("payout_yield " + when);
    if (!rvol_by.count(m)) gaps.push_back("realized_vol " + when);
  }
  if (!gaps.empty()) {
    std::string msg = "feature table: missing values inside aligned range " +
                      YearMonth::from_index(start).str() + ".." + YearMonth::from_index(end).str() +
                      ":";
    for (std::size_t i = 0; i < gaps.size() && i < 12; ++i) msg += " [" + gaps[i] + "]";
    if (gaps.size() > 12) msg += " ... (" + std::to_string(gaps.size()) + " total)";
    throw AlignmentError(msg);
  }

  std::vector<MonthlyRecord> records;
  for (int m = start + 3; m <= end; ++m) {
    const RawMonthly& r = *raw_by.at(m);
    MonthlyRecord rec;
    rec.date = r.date;
    rec.mkt_return = r.mkt_excess + r.rf;
    rec.rf = r.rf;
    const auto& pred = pred_by.at(m)->values;
    std::copy(pred.begin(), pred.end(), rec.features.begin());
    rec.features[kLagExcessSlot] = raw_by.at(m - 1)->mkt_excess;
    for (int lag = 1; lag <= 3; ++lag) {
      rec.features[kPayoutLag1Slot + lag - 1] = payout_by.at(m - lag);
      rec.features[kRealizedVolLag1Slot + lag - 1] = rvol_by.at(m - lag);
    }
    records.push_back(rec);
  }
  return records;
}

SplitSet split_by_year(std::span<const MonthlyRecord> records) {
  SplitSet splits;
  splits[0].name = SplitName::train;
  splits[1].name = SplitName::validation;
  splits[2].name = SplitName::test;
  for (const auto& rec : records) {
    const int y = rec.date.year;
    if (y < kFirstYear || y > kLastYear) continue;
    const int which = y <= kTrainLastYear ? 0 : (y <= kValidationLastYear ? 1 : 2);
    splits[which].records.push_back(rec);
  }
  return splits;
}

SplitSet standardize(SplitSet splits, std::vector<std::string>* warnings) {
  const auto& train = splits[0].records;
  if (train.empty()) throw DataError("standardize: train split is empty");
  auto stats = std::make_shared<StandardizationStats>();
  const double n = static_cast<double>(train.size());
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const double first = train.front().features[f];
    const bool constant = std::all_of(train.begin(), train.end(), [&](const MonthlyRecord& r) {
      return r.features[f] == first;
    });
    if (constant) {
      stats->mean[f] = first;
      stats->stddev[f] = 1.0;
      stats->degenerate[f] = true;
      const std::string msg = "standardize: feature '" + std::string(kFeatureNames[f]) +
                              "' has zero variance on train; using divisor 1";
      log_warning(msg);
      if (warnings) warnings->push_back(msg);
      continue;
    }
    double sum = 0.0;
    for (const auto& r : train) sum += r.features[f];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& r : train) sq += (r.features[f] - mean) * (r.features[f] - mean);
    stats->mean[f] = mean;
    stats->stddev[f] = std::sqrt(sq / n);
  }
  for (auto& split : splits) {
    for (auto& rec : split.records) {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        rec.features[f] = (rec.features[f] - stats->mean[f]) / stats->stddev[f];
      }
    }
    split.stats = stats;
  }
  return splits;
}

std::array<double, kFeatureCount> destandardize(const MonthlyRecord& record,
                                                const StandardizationStats& stats) {
  std::array<double, kFeatureCount> out{};
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    out[f] = record.features[f] * stats.stddev[f] + stats.mean[f];
  }
  return out;
}

}  // namespace tidealloc::data
