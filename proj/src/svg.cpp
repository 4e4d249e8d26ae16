#include "projlab/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace projlab {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
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

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log2 = false;

  double value(double v) const { return log2 ? std::log2(v) : v; }
};

Axis fit_axis(const std::vector<double>& values, bool log2) {
  Axis a;
  a.log2 = log2;
  double lo = INFINITY, hi = -INFINITY;
  for (const double v : values) {
    if (!std::isfinite(v) || (log2 && v <= 0.0)) continue;
    lo = std::min(lo, a.value(v));
    hi = std::max(hi, a.value(v));
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  a.lo = lo - pad;
  a.hi = hi + pad;
  return a;
}

std::vector<double> ticks(const Axis& a) {
  const double span = a.hi - a.lo;
  double step = std::pow(10.0, std::floor(std::log10(span / 5)));
  for (const double m : {2.0, 5.0, 10.0}) {
    if (span / step <= 6) break;
    step = std::pow(10.0, std::floor(std::log10(span / 5))) * m;
  }
  if (a.log2) step = std::max(1.0, std::round(step));
  std::vector<double> out;
  for (double v = std::ceil(a.lo / step) * step; v <= a.hi + 1e-12; v += step) out.push_back(std::abs(v) < 1e-12 ? 0.0 : v);
  return out;
}

std::string tick_label(double v, bool log2) { return log2 ? fmt::format("2^{}", v) : fmt::format("{:.3g}", v); }

}  // namespace

std::string render_svg(const Plot& plot) {
  std::vector<double> all_x, all_y;
  for (const auto& s : plot.series) {
    all_x.insert(all_x.end(), s.xs.begin(), s.xs.end());
    all_y.insert(all_y.end(), s.ys.begin(), s.ys.end());
  }
  if (plot.has_reference) all_y.push_back(plot.reference);
  const Axis ax = fit_axis(all_x, plot.log2_x), ay = fit_axis(all_y, plot.log2_y);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (ax.value(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (ay.value(v) - ay.lo) / (ay.hi - ay.lo) * ph; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && !(plot.log2_x && x <= 0) && !(plot.log2_y && y <= 0);
  };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kWidth, kHeight);
  out += fmt::format("<text x=\"{:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", kWidth / 2,
                     escape(plot.title));
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", kLeft, kTop,
                     pw, ph);
  for (const double t : ticks(ax)) {
    const double x = kLeft + (t - ax.lo) / (ax.hi - ax.lo) * pw;
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1}\" x2=\"{0:.1f}\" y2=\"{2}\" stroke=\"black\"/>\n", x, kTop + ph,
                       kTop + ph + 5);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", x, kTop + ph + 18,
                       tick_label(t, ax.log2));
  }
  for (const double t : ticks(ay)) {
    const double y = kTop + ph - (t - ay.lo) / (ay.hi - ay.lo) * ph;
    out += fmt::format("<line x1=\"{0}\" y1=\"{1:.1f}\" x2=\"{2}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n", kLeft - 5, y,
                       kLeft);
    out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n", kLeft - 8, y + 4,
                       tick_label(t, ay.log2));
  }
  out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2, kHeight - 12,
                     escape(plot.x_label));
  out += fmt::format("<text x=\"16\" y=\"{0:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.1f})\">{1}</text>\n",
                     kTop + ph / 2, escape(plot.y_label));

  if (plot.has_reference && usable(1.0, plot.reference)) {
    const double y = py(plot.reference);
    out += fmt::format(
        "<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n", kLeft, y,
        kLeft + pw, y);
    out += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\" fill=\"gray\">{}</text>\n", kLeft + pw - 4,
                       y - 4, escape(plot.reference_label));
  }

  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const auto& s = plot.series[i];
    const char* color = kColors[i % std::size(kColors)];
    std::string points;
    for (std::size_t j = 0; j < std::min(s.xs.size(), s.ys.size()); ++j) {
      if (!usable(s.xs[j], s.ys[j])) continue;
      if (s.scatter) {
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2\" fill=\"{}\"/>\n", px(s.xs[j]), py(s.ys[j]), color);
      } else {
        points += fmt::format("{}{:.2f},{:.2f}", points.empty() ? "" : " ", px(s.xs[j]), py(s.ys[j]));
      }
    }
    if (!points.empty()) {
      out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, points);
    }
    if (!s.label.empty()) {
      const double y = kTop + 14 + 16 * static_cast<double>(i);
      out += fmt::format("<rect x=\"{}\" y=\"{:.1f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", kLeft + 10, y - 9,
                         color);
      out += fmt::format("<text x=\"{}\" y=\"{:.1f}\">{}</text>\n", kLeft + 25, y, escape(s.label));
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace projlab
