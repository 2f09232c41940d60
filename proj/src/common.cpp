#include "tidealloc/common.hpp"

#include <charconv>
#include <cstdio>
#include <iostream>
#include <mutex>

#include "tidealloc/log.hpp"

namespace tidealloc {

YearMonth YearMonth::from_yyyymm(long value) {
  const int year = static_cast<int>(value / 100);
  const int month = static_cast<int>(value % 100);
  if (month < 1 || month > 12 || year < 1000 || year > 9999) {
    throw std::invalid_argument("invalid YYYYMM date " + std::to_string(value));
  }
  return {year, month};
}

std::string YearMonth::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

YearMonth YearMonth::parse(std::string_view text) {
  int year = 0;
  int month = 0;
  const bool ok = text.size() == 7 && text[4] == '-' &&
                  std::from_chars(text.data(), text.data() + 4, year).ptr == text.data() + 4 &&
                  std::from_chars(text.data() + 5, text.data() + 7, month).ptr == text.data() + 7;
  if (!ok || month < 1 || month > 12) {
    throw std::invalid_argument("invalid YYYY-MM date '" + std::string(text) + "'");
  }
  return {year, month};
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) {
    throw std::runtime_error("format_double: conversion failed");
  }
  return std::string(buf, end);
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      fields.emplace_back(trim(current));
      current.clear();
    } else if (c != '\r' && c != '\n') {
      current.push_back(c);
    }
  }
  fields.emplace_back(trim(current));
  return fields;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace tidealloc

// --- logging ---------------------------------------------------------------

namespace tidealloc {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

LogSink& current_sink() {
  static LogSink sink = [](LogLevel level, const std::string& message) {
    if (level == LogLevel::debug) return;
    static constexpr const char* kTags[] = {"debug", "info", "warning", "error"};
    std::cerr << "[" << kTags[static_cast<int>(level)] << "] " << message << '\n';
  };
  return sink;
}

}  // namespace

LogSink set_log_sink(LogSink sink) {
  std::lock_guard lock(sink_mutex());
  std::swap(current_sink(), sink);
  return sink;
}

void log_message(LogLevel level, const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(level, message);
}

}  // namespace tidealloc
