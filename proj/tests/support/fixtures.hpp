#pragma once

// Shared helpers for the test binaries: scratch directories and synthetic source files in
// the published Fama/French and Goyal-Welch layouts.

#include <cstdint>
#include <filesystem>
#include <string>

#include "tidealloc/log.hpp"

namespace fixtures {

namespace fs = std::filesystem;

/// Fresh empty directory under the system temp dir.
fs::path scratch_dir(const std::string& name);

struct SourceFiles {
  fs::path monthly;
  fs::path daily;
  fs::path predictors;
  fs::path payout;
};

/// Random but well-formed inputs covering [first_year, last_year]. Daily files carry three
/// trading days per month.
SourceFiles write_sources(const fs::path& dir, std::uint64_t seed, int first_year = 1926,
                          int last_year = 2019);

/// Silences library logging for its lifetime.
struct QuietLog {
  QuietLog();
  ~QuietLog();
  tidealloc::LogSink previous;
};

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace fixtures
