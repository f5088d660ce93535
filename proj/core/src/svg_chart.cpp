#include <algorithm>
#include <cstdio>
#include <limits>

#include "mvee/result_store.hpp"

namespace mvee {

namespace {

constexpr double kWidth = 760;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 200;  // legend column
constexpr double kTop = 44;
constexpr double kBottom = 56;
constexpr int kTicks = 5;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::max();
  double hi = std::numeric_limits<double>::lowest();

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (lo > hi) {
      lo = 0;
      hi = 1;
    } else if (lo == hi) {
      const double d = lo == 0 ? 1 : std::abs(lo) * 0.5;
      lo -= d;
      hi += d;
    }
  }
};

}  // namespace

std::string Chart::svg() const {
  Range xr;
  Range yr;
  yr.add(0);
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      xr.add(p.x);
      yr.add(p.y);
    }
  }
  xr.pad();
  if (yr.hi > 0) yr.hi *= 1.05;
  yr.pad();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out += "  <text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
         "</text>\n";

  // Axes, grid and ticks.
  out += "  <g stroke=\"#333333\" stroke-width=\"1\">\n";
  out += "    <line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
         num(kTop + ph) + "\"/>\n";
  out += "    <line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kTop + ph) + "\"/>\n";
  out += "  </g>\n";
  out += "  <g fill=\"#333333\">\n";
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    out += "    <text x=\"" + num(sx(xv)) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
           tick_label(xv) + "</text>\n";
    out += "    <text x=\"" + num(kLeft - 8) + "\" y=\"" + num(sy(yv) + 4) + "\" text-anchor=\"end\">" +
           tick_label(yv) + "</text>\n";
    out += "    <line x1=\"" + num(kLeft) + "\" y1=\"" + num(sy(yv)) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
           num(sy(yv)) + "\" stroke=\"#e5e5e5\"/>\n";
  }
  out += "    <text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 14) + "\" text-anchor=\"middle\">" +
         escape(param) + "</text>\n";
  const std::string ylabel = unit.empty() ? metric : metric + " [" + unit + "]";
  out += "    <text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(kTop + ph / 2) + ")\">" + escape(ylabel) + "</text>\n";
  out += "  </g>\n";

  // One polyline per series, then the legend.
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const std::string color = kPalette[i % std::size(kPalette)];
    std::string pts;
    for (const auto& p : s.points) {
      if (!pts.empty()) pts += ' ';
      pts += num(sx(p.x)) + "," + num(sy(p.y));
    }
    out += "  <g class=\"series\" data-label=\"" + escape(s.label) + "\">\n";
    out += "    <polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    for (const auto& p : s.points) {
      out += "    <circle cx=\"" + num(sx(p.x)) + "\" cy=\"" + num(sy(p.y)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    out += "  </g>\n";
    const double ly = kTop + 10 + 20 * static_cast<double>(i);
    const double lx = kLeft + pw + 20;
    out += "  <line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 24) + "\" y2=\"" + num(ly) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    out += "  <text x=\"" + num(lx + 30) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.label) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace mvee
