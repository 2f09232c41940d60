#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "tidealloc/env.hpp"

namespace tidealloc::env {
namespace {

constexpr std::size_t kBurnIn = 12;

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double pop_std_of(std::span<const double> xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace

// Feature slots for month t, all computed from excess returns of months t-12..t-1:
//   0-5   excess return lags 1..6
//   6-8   trailing mean over 3, 6, 12 months
//   9-11  trailing population std over 3, 6, 12 months
//   12-14 squared excess return lags 1..3
//   15-16 trailing 12-month min and max
//   17    trailing 12-month sum of ln(1 + market return)
// Each slot is then z-scored over the generated records (divisor 1 when constant).
data::DatasetSplit synthetic_market(const SyntheticMarketSpec& spec, std::size_t months,
                                    std::uint64_t seed, data::SplitName name) {
  if (months < 24) throw ValidationError("synthetic_market: need at least 24 months");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t total = months + kBurnIn;
  std::vector<double> mkt(total);
  for (auto& r : mkt) r = spec.mu + spec.sigma * normal(rng);

  data::DatasetSplit split;
  split.name = name;
  split.records.reserve(months);
  YearMonth date{1000, 1};
  for (std::size_t t = kBurnIn; t < total; ++t) {
    std::array<double, kBurnIn> ex{};  // ex[0] is lag 1
    for (std::size_t lag = 1; lag <= kBurnIn; ++lag) ex[lag - 1] = mkt[t - lag] - spec.rf;
    data::MonthlyRecord rec;
    rec.date = date;
    date = date.next();
    rec.mkt_return = mkt[t];
    rec.rf = spec.rf;
    auto& f = rec.features;
    for (std::size_t i = 0; i < 6; ++i) f[i] = ex[i];
    const std::size_t spans[] = {3, 6, 12};
    for (std::size_t i = 0; i < 3; ++i) {
      const std::span<const double> w(ex.data(), spans[i]);
      f[6 + i] = mean_of(w);
      f[9 + i] = pop_std_of(w);
    }
    for (std::size_t i = 0; i < 3; ++i) f[12 + i] = ex[i] * ex[i];
    f[15] = *std::min_element(ex.begin(), ex.end());
    f[16] = *std::max_element(ex.begin(), ex.end());
    double cum = 0.0;
    for (std::size_t lag = 1; lag <= kBurnIn; ++lag) cum += std::log1p(mkt[t - lag]);
    f[17] = cum;
    split.records.push_back(rec);
  }

  auto stats = std::make_shared<data::StandardizationStats>();
  const double n = static_cast<double>(split.records.size());
  for (std::size_t s = 0; s < data::kFeatureCount; ++s) {
    const double first = split.records.front().features[s];
    const bool constant = std::all_of(split.records.begin(), split.records.end(),
                                      [&](const auto& r) { return r.features[s] == first; });
    double mean = first;
    double sd = 1.0;
    if (!constant) {
      double sum = 0.0;
      for (const auto& r : split.records) sum += r.features[s];
      mean = sum / n;
      double sq = 0.0;
      for (const auto& r : split.records) sq += (r.features[s] - mean) * (r.features[s] - mean);
      sd = std::sqrt(sq / n);
    }
    stats->mean[s] = mean;
    stats->stddev[s] = sd;
    stats->degenerate[s] = constant;
    for (auto& r : split.records) r.features[s] = (r.features[s] - mean) / sd;
  }
  split.stats = stats;
  return split;
}

}  // namespace tidealloc::env
