#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "tidealloc/evaluation.hpp"

namespace tidealloc::eval {
namespace {

constexpr std::string_view kReportMagic = "# tidealloc-report v";
constexpr std::string_view kSummaryMagic = "# tidealloc-summary v";
constexpr std::string_view kSeriesMagic = "# tidealloc-comparison v";
constexpr int kVersion = 1;
constexpr std::string_view kReportColumns =
    "date,weight,mkt_return,rf,portfolio_return,reward,wealth,rolling_sharpe";

void require_plain_name(const std::string& name) {
  if (name.empty() || name.find_first_of(" ,\t\n\r=") != std::string::npos) {
    throw ValidationError("policy name '" + name + "' must be non-empty without spaces, commas or '='");
  }
}

std::string cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }

std::map<std::string, std::string> header_fields(std::string_view line, std::string_view magic,
                                                 std::string_view what) {
  if (line.rfind(magic, 0) != 0) throw VersionError(std::string(what) + ": missing versioned header");
  std::istringstream tokens{std::string(line.substr(magic.size()))};
  int version = 0;
  tokens >> version;
  if (version != kVersion) {
    throw VersionError(std::string(what) + ": unsupported version " + std::to_string(version));
  }
  std::map<std::string, std::string> fields;
  std::string tok;
  while (tokens >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw SchemaError(std::string(what) + ": bad header token '" + tok + "'");
    fields[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return fields;
}

std::string field(const std::map<std::string, std::string>& fields, const std::string& key,
                  std::string_view what) {
  const auto it = fields.find(key);
  if (it == fields.end()) throw SchemaError(std::string(what) + ": header lacks " + key);
  return it->second;
}

}  // namespace

void write_report(std::ostream& out, const BacktestReport& report, std::string_view manifest_hash) {
  require_plain_name(report.policy);
  out << kReportMagic << kVersion << " policy=" << report.policy
      << " split=" << data::to_string(report.split) << " max_weight=" << format_double(report.max_weight)
      << " sharpe=" << to_string(report.convention) << " manifest=" << manifest_hash << '\n';
  out << kReportColumns << '\n';
  for (std::size_t i = 0; i < report.months.size(); ++i) {
    const MonthRow& m = report.months[i];
    out << m.date.str() << ',' << format_double(m.weight) << ',' << format_double(m.mkt_return) << ','
        << format_double(m.rf) << ',' << format_double(m.portfolio_return) << ','
        << format_double(m.reward) << ',' << format_double(m.wealth) << ',';
    if (i + 1 >= kSharpeWindow) out << format_double(report.rolling_sharpe[i + 1 - kSharpeWindow]);
    out << '\n';
  }
}

BacktestReport read_report(std::istream& in, std::string* manifest_hash) {
  constexpr std::string_view what = "report";
  std::string line;
  if (!std::getline(in, line)) throw VersionError("report: empty file");
  const auto fields = header_fields(line, kReportMagic, what);
  BacktestReport report;
  report.policy = field(fields, "policy", what);
  report.split = data::split_from_string(field(fields, "split", what));
  if (!parse_double(field(fields, "max_weight", what), report.max_weight)) {
    throw SchemaError("report: bad max_weight");
  }
  report.convention = sharpe_convention_from_string(field(fields, "sharpe", what));
  if (manifest_hash) *manifest_hash = field(fields, "manifest", what);

  if (!std::getline(in, line) || line != kReportColumns) throw SchemaError("report: unexpected column header");
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 8) throw ParseError("report: expected 8 fields", lineno);
    MonthRow m;
    try {
      m.date = YearMonth::parse(cells[0]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), lineno);
    }
    double* targets[] = {&m.weight, &m.mkt_return, &m.rf, &m.portfolio_return, &m.reward, &m.wealth};
    for (std::size_t j = 0; j < 6; ++j) {
      if (!parse_double(cells[j + 1], *targets[j])) throw ParseError("report: bad number", lineno);
    }
    report.months.push_back(m);
  }
  std::vector<double> excess;
  for (const MonthRow& m : report.months) excess.push_back(m.excess_return());
  report.rolling_sharpe = rolling_sharpe(excess, kSharpeWindow, report.convention);
  report.log_utility = log_utility(report);
  report.portfolio_value = portfolio_value(report);
  if (!report.rolling_sharpe.empty()) {
    report.average_sharpe =
        std::accumulate(report.rolling_sharpe.begin(), report.rolling_sharpe.end(), 0.0) /
        static_cast<double>(report.rolling_sharpe.size());
  }
  return report;
}

void write_summary(std::ostream& out, const Comparison& comparison, std::string_view manifest_hash) {
  out << kSummaryMagic << kVersion << " split=" << data::to_string(comparison.split)
      << " sharpe=" << to_string(comparison.convention) << " manifest=" << manifest_hash << '\n';
  out << "policy,log_utility,portfolio_value,average_sharpe\n";
  for (const SummaryRow& row : comparison.summary) {
    out << row.policy << ',' << format_double(row.log_utility) << ','
        << format_double(row.portfolio_value) << ',' << format_double(row.average_sharpe) << '\n';
  }
}

void write_comparison_series(std::ostream& out, const Comparison& comparison,
                             std::string_view manifest_hash) {
  out << kSeriesMagic << kVersion << " split=" << data::to_string(comparison.split)
      << " sharpe=" << to_string(comparison.convention) << " manifest=" << manifest_hash << '\n';
  out << "date";
  for (const char* kind : {"wealth", "sharpe", "weight"}) {
    for (const std::string& p : comparison.policies) out << ',' << kind << '_' << p;
  }
  out << '\n';
  for (std::size_t i = 0; i < comparison.dates.size(); ++i) {
    out << comparison.dates[i].str();
    for (const auto* series : {&comparison.wealth, &comparison.sharpe, &comparison.weights}) {
      for (const auto& s : *series) out << ',' << cell(s[i]);
    }
    out << '\n';
  }
}

}  // namespace tidealloc::eval
