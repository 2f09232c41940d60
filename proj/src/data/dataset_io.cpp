#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "tidealloc/data.hpp"

namespace tidealloc::data {
namespace {

constexpr std::string_view kSplitMagic = "# tidealloc-dataset v";
constexpr std::string_view kStatsMagic = "# tidealloc-stats v";

std::string split_header_row() {
  std::string row = "date,mkt_return,rf";
  for (auto name : kFeatureNames) {
    row += ',';
    row += name;
  }
  return row;
}

/// Checks "<magic><version> ..." and returns the remainder after the version.
std::string expect_magic(std::istream& in, std::string_view magic, const std::string& what) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(magic, 0) != 0) {
    throw VersionError(what + ": missing versioned header");
  }
  std::istringstream rest(line.substr(magic.size()));
  int version = 0;
  rest >> version;
  if (version != kDatasetVersion) {
    throw VersionError(what + ": unsupported version " + std::to_string(version) +
                       " (expected " + std::to_string(kDatasetVersion) + ")");
  }
  std::string tail;
  std::getline(rest, tail);
  return tail;
}

std::string field_value(const std::string& tail, std::string_view key) {
  std::istringstream tokens(tail);
  std::string tok;
  const std::string prefix = std::string(key) + "=";
  while (tokens >> tok) {
    if (tok.rfind(prefix, 0) == 0) return tok.substr(prefix.size());
  }
  return {};
}

YearMonth parse_date_dash(const std::string& text, std::size_t line) {
  if (text.size() != 7 || text[4] != '-') throw ParseError("malformed date '" + text + "'", line);
  try {
    return YearMonth::from_yyyymm(std::stol(text.substr(0, 4)) * 100 + std::stol(text.substr(5)));
  } catch (const std::exception&) {
    throw ParseError("malformed date '" + text + "'", line);
  }
}

double field_double(const std::string& text, std::size_t line) {
  double v = 0.0;
  if (!parse_double(text, v)) throw ParseError("not a number: '" + text + "'", line);
  return v;
}

}  // namespace

void write_split(std::ostream& out, const DatasetSplit& split, std::string_view manifest_hash) {
  out << kSplitMagic << kDatasetVersion << " split=" << to_string(split.name)
      << " manifest=" << manifest_hash << '\n';
  out << split_header_row() << '\n';
  for (const auto& rec : split.records) {
    out << rec.date.str() << ',' << format_double(rec.mkt_return) << ','
        << format_double(rec.rf);
    for (double f : rec.features) out << ',' << format_double(f);
    out << '\n';
  }
}

DatasetSplit read_split(std::istream& in, std::shared_ptr<const StandardizationStats> stats) {
  const std::string tail = expect_magic(in, kSplitMagic, "dataset file");
  DatasetSplit split;
  split.name = split_from_string(field_value(tail, "split"));
  split.stats = std::move(stats);

  std::string line;
  if (!std::getline(in, line) || trim(line) != split_header_row()) {
    throw SchemaError("dataset file: unexpected column header");
  }
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3 + kFeatureCount) {
      throw ParseError("expected " + std::to_string(3 + kFeatureCount) + " fields", lineno);
    }
    MonthlyRecord rec;
    rec.date = parse_date_dash(fields[0], lineno);
    rec.mkt_return = field_double(fields[1], lineno);
    rec.rf = field_double(fields[2], lineno);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      rec.features[f] = field_double(fields[3 + f], lineno);
    }
    if (!split.records.empty() && rec.date.index() != split.records.back().date.index() + 1) {
      throw ParseError("dataset months not contiguous", lineno);
    }
    split.records.push_back(rec);
  }
  return split;
}

void write_stats(std::ostream& out, const StandardizationStats& stats,
                 std::string_view manifest_hash) {
  out << kStatsMagic << kDatasetVersion << " manifest=" << manifest_hash << '\n';
  out << "feature,mean,std,degenerate\n";
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    out << kFeatureNames[f] << ',' << format_double(stats.mean[f]) << ','
        << format_double(stats.stddev[f]) << ',' << (stats.degenerate[f] ? 1 : 0) << '\n';
  }
}

StandardizationStats read_stats(std::istream& in) {
  expect_magic(in, kStatsMagic, "stats file");
  std::string line;
  if (!std::getline(in, line) || trim(line) != "feature,mean,std,degenerate") {
    throw SchemaError("stats file: unexpected column header");
  }
  StandardizationStats stats;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (!std::getline(in, line)) throw SchemaError("stats file: too few feature rows");
    const auto fields = split_csv_line(line);
    if (fields.size() != 4 || fields[0] != kFeatureNames[f]) {
      throw SchemaError("stats file: expected row for feature " + std::string(kFeatureNames[f]));
    }
    stats.mean[f] = field_double(fields[1], f + 3);
    stats.stddev[f] = field_double(fields[2], f + 3);
    stats.degenerate[f] = fields[3] == "1";
  }
  return stats;
}

std::optional<std::string> read_header_hash(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) return std::nullopt;
  std::string hash = field_value(line, "manifest");
  if (hash.empty()) return std::nullopt;
  return hash;
}

std::filesystem::path split_path(const std::filesystem::path& dir, SplitName name) {
  return dir / (std::string(to_string(name)) + ".csv");
}

std::filesystem::path stats_path(const std::filesystem::path& dir) { return dir / "stats.csv"; }

PreparedData load_prepared(const std::filesystem::path& dir, std::span<const SplitName> only) {
  PreparedData data;
  {
    std::ifstream in(stats_path(dir));
    if (!in) throw DataError("cannot open " + stats_path(dir).string());
    data.fingerprint = read_header_hash(in).value_or("");
    in.clear();
    in.seekg(0);
    data.stats = std::make_shared<const StandardizationStats>(read_stats(in));
  }
  const SplitName all[] = {SplitName::train, SplitName::validation, SplitName::test};
  for (SplitName name : all) {
    data.splits[static_cast<int>(name)].name = name;
    data.splits[static_cast<int>(name)].stats = data.stats;
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    std::ifstream in(split_path(dir, name));
    if (!in) throw DataError("cannot open " + split_path(dir, name).string());
    if (read_header_hash(in).value_or("") != data.fingerprint) {
      throw VersionError(split_path(dir, name).string() + ": manifest differs from the stats file");
    }
    in.clear();
    in.seekg(0);
    DatasetSplit split = read_split(in, data.stats);
    if (split.name != name) throw SchemaError(split_path(dir, name).string() + ": split label mismatch");
    data.splits[static_cast<int>(name)] = std::move(split);
  }
  return data;
}

}  // namespace tidealloc::data
