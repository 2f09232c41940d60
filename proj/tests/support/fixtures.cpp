#include "support/fixtures.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace fixtures {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tidealloc_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

QuietLog::QuietLog() : previous(tidealloc::set_log_sink([](tidealloc::LogLevel, const std::string&) {})) {}

QuietLog::~QuietLog() { tidealloc::set_log_sink(previous); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

SourceFiles write_sources(const fs::path& dir, std::uint64_t seed, int first_year, int last_year) {
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  SourceFiles files{dir / "F-F_Research_Data_Factors.CSV", dir / "F-F_Research_Data_Factors_daily.CSV",
                    dir / "PredictorData.csv", dir / "payout_yield.csv"};

  std::ostringstream monthly, daily, pred, payout;
  monthly << "This file was created using a synthetic generator.\n"
          << "The 1-month TBill return is from a made-up series.\n\n"
          << ",Mkt-RF,SMB,HML,RF\n";
  daily << "Synthetic daily factors\n\n,Mkt-RF,SMB,HML,RF\n";
  pred << "yyyymm,Index,D12,E12,b/m,tbl,AAA,BAA,lty,ntis,Rfree,infl,ltr,corpr,svar\n";
  payout << "yyyymm,payout\n";

  double index = 10.0;
  double d12 = 0.4;
  double e12 = 0.7;
  for (int y = first_year; y <= last_year; ++y) {
    for (int m = 1; m <= 12; ++m) {
      const long ym = y * 100L + m;
      const double rf = 0.25 + 0.05 * z(rng);
      const double mkt = 0.6 + 4.5 * z(rng);
      monthly << ym << ',' << fmt("%8.2f", mkt) << ',' << fmt("%8.2f", z(rng)) << ','
              << fmt("%8.2f", z(rng)) << ',' << fmt("%8.2f", rf) << '\n';
      for (int d = 1; d <= 3; ++d) {
        daily << ym * 100 + d * 7 << ',' << fmt("%6.2f", 0.03 + 1.0 * z(rng)) << ','
              << fmt("%6.2f", 0.5 * z(rng)) << ',' << fmt("%6.2f", 0.5 * z(rng)) << ','
              << fmt("%6.3f", rf / 21.0) << '\n';
      }
      index *= 1.0 + (mkt + rf) / 100.0;
      d12 *= 1.0 + 0.002 + 0.01 * z(rng);
      e12 *= 1.0 + 0.002 + 0.03 * z(rng);
      const double tbl = 0.03 + 0.005 * z(rng);
      const double aaa = 0.05 + 0.005 * z(rng);
      pred << ym << ',' << fmt("%.4f", index) << ',' << fmt("%.5f", d12) << ',' << fmt("%.5f", e12)
           << ',' << fmt("%.6f", 0.6 + 0.1 * z(rng)) << ',' << fmt("%.5f", tbl) << ','
           << fmt("%.5f", aaa) << ',' << fmt("%.5f", aaa + 0.01 + 0.002 * z(rng)) << ','
           << fmt("%.5f", tbl + 0.01 + 0.003 * z(rng)) << ',' << fmt("%.6f", 0.01 * z(rng)) << ','
           << fmt("%.6f", rf / 100.0) << ',' << fmt("%.6f", 0.002 + 0.004 * z(rng)) << ','
           << fmt("%.6f", 0.005 + 0.02 * z(rng)) << ',' << fmt("%.6f", 0.005 + 0.02 * z(rng)) << ','
           << fmt("%.7f", 0.002 + 0.0005 * std::abs(z(rng))) << '\n';
      payout << ym << ',' << fmt("%.6f", 0.04 + 0.005 * z(rng)) << '\n';
    }
  }
  monthly << "\n Annual Factors: January-December \n,Mkt-RF,SMB,HML,RF\n";
  for (int y = first_year; y <= last_year; ++y) monthly << "  " << y << ",  8.00,  1.00,  2.00,  3.00\n";
  monthly << "\nCopyright synthetic\n";

  write_text(files.monthly, monthly.str());
  write_text(files.daily, daily.str());
  write_text(files.predictors, pred.str());
  write_text(files.payout, payout.str());
  return files;
}

}  // namespace fixtures
