#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "tidealloc/evaluation.hpp"

namespace tidealloc::eval {
namespace {

constexpr double kWidth = 900.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round-number tick spacing giving roughly `target` intervals.
double tick_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string_view figure_file_name(Figure figure) {
  switch (figure) {
    case Figure::wealth: return "fig_portfolio_value.svg";
    case Figure::rolling_sharpe: return "fig_rolling_sharpe.svg";
    case Figure::weights: return "fig_weights.svg";
  }
  return "fig.svg";
}

std::string render_figure(const Comparison& comparison, Figure figure, std::string_view manifest_hash) {
  const std::vector<std::vector<double>>* series = &comparison.wealth;
  std::string title = "Portfolio value";
  std::string ylabel = "wealth (W0 = 1)";
  if (figure == Figure::rolling_sharpe) {
    series = &comparison.sharpe;
    title = "12-month rolling Sharpe ratio";
    ylabel = std::string("Sharpe (") + std::string(to_string(comparison.convention)) + ")";
  } else if (figure == Figure::weights) {
    series = &comparison.weights;
    title = "Market weight";
    ylabel = "weight";
  }
  title += " (" + std::string(data::to_string(comparison.split)) + ")";

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : *series) {
    for (double v : s) {
      if (std::isnan(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  if (figure == Figure::weights) lo = std::min(lo, 0.0);
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double step = tick_step(hi - lo, 6);
  lo = std::floor(lo / step) * step;
  hi = std::ceil(hi / step) * step;

  const std::size_t n = comparison.dates.size();
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](std::size_t i) { return kLeft + (n > 1 ? plot_w * i / double(n - 1) : 0.0); };
  auto py = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<!-- tidealloc-figure v1 manifest=" << manifest_hash << " -->\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(title) << "</text>\n";

  for (double t = lo; t <= hi + step * 1e-6; t += step) {
    const std::string y = fixed(py(t));
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kLeft + plot_w << "\" y2=\"" << y
        << "\" stroke=\"#dddddd\"/>\n"
        << "<text x=\"" << kLeft - 6 << "\" y=\"" << y << "\" text-anchor=\"end\" dy=\"4\">"
        << fixed(t, step < 0.1 ? 3 : 2) << "</text>\n";
  }
  if (n > 0) {
    const int first_year = comparison.dates.front().year;
    const int last_year = comparison.dates.back().year;
    const int year_step = std::max(1, (last_year - first_year) / 8);
    for (std::size_t i = 0; i < n; ++i) {
      const YearMonth d = comparison.dates[i];
      if (d.month != 1 || (d.year - first_year) % year_step != 0) continue;
      svg << "<text x=\"" << fixed(px(i)) << "\" y=\"" << kTop + plot_h + 18
          << "\" text-anchor=\"middle\">" << d.year << "</text>\n";
    }
  }
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text transform=\"translate(18," << kTop + plot_h / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";

  for (std::size_t p = 0; p < series->size(); ++p) {
    const char* colour = kPalette[p % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = (*series)[p][i];
      if (std::isnan(v)) continue;
      points += fixed(px(i)) + ',' + fixed(py(v)) + ' ';
    }
    if (!points.empty()) points.pop_back();
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.4\" points=\""
        << points << "\"/>\n";
    const double ly = kTop + 14 + 18.0 * p;
    svg << "<line x1=\"" << kLeft + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + plot_w + 32
        << "\" y2=\"" << ly << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kLeft + plot_w + 38 << "\" y=\"" << ly + 4 << "\">"
        << escape(comparison.policies[p]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace tidealloc::eval
