#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tidealloc {

// Error families map one-to-one onto CLI exit codes (1, 2, 3).

/// Bad configuration or arguments, detected before any compute.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Anything wrong with input data: unreadable files, malformed rows, misaligned dates.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

/// Failures while running an experiment.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 1 + portfolio return <= 0: the log reward is undefined and the episode is aborted.
class RuinError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

/// Episode protocol misuse (step after done, weight outside bounds).
class ProtocolError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class NumericError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class VersionError : public DataError {
 public:
  using DataError::DataError;
};

/// Calendar month.
struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  static YearMonth from_yyyymm(long value);
  /// "YYYY-MM"; throws std::invalid_argument otherwise.
  static YearMonth parse(std::string_view text);
  static YearMonth from_index(int index) { return {index / 12, index % 12 + 1}; }

  /// Months since year 0; consecutive months differ by exactly one.
  int index() const { return year * 12 + (month - 1); }
  int yyyymm() const { return year * 100 + month; }
  YearMonth next() const { return from_index(index() + 1); }
  YearMonth prev() const { return from_index(index() - 1); }
  std::string str() const;  // "YYYY-MM"

  auto operator<=>(const YearMonth&) const = default;
};

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

/// Strict full-string double parse. Returns false on trailing garbage or empty input.
bool parse_double(std::string_view text, double& out);

std::string_view trim(std::string_view text);

/// Splits one CSV line on commas, honouring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace tidealloc
