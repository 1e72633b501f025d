#include "reldec/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace reldec {

namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 60;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

}  // namespace

std::string render_svg(const Plot& plot) {
  auto tx = [&](double x) { return plot.log_x ? std::log10(x) : x; };
  Range rx, ry;
  for (const auto& s : plot.series) {
    if (s.xs.size() != s.ys.size()) throw std::invalid_argument("plot series '" + s.name + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (plot.log_x && !(s.xs[i] > 0)) throw std::invalid_argument("log axis needs positive x values");
      rx.add(tx(s.xs[i]));
      ry.add(s.ys[i]);
    }
  }
  if (plot.diagonal) {
    const double lo = std::min(rx.lo, ry.lo), hi = std::max(rx.hi, ry.hi);
    rx.lo = ry.lo = lo;
    rx.hi = ry.hi = hi;
  }
  rx.finish();
  ry.finish();

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (tx(x) - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(plot.title)
     << "</text>\n";
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double fx = rx.lo + (rx.hi - rx.lo) * k / 4.0;
    const double x = kLeft + pw * k / 4.0;
    os << "<line x1=\"" << x << "\" y1=\"" << kTop + ph << "\" x2=\"" << x << "\" y2=\"" << kTop + ph + 5
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
       << num(plot.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
    const double fy = ry.lo + (ry.hi - ry.lo) * k / 4.0;
    const double y = kTop + ph - ph * k / 4.0;
    os << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\"" << y
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << num(fy) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">"
     << escape(plot.x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(plot.y_label) << "</text>\n";

  if (plot.diagonal) {
    os << "<line x1=\"" << px(plot.log_x ? std::pow(10.0, rx.lo) : rx.lo) << "\" y1=\"" << py(ry.lo) << "\" x2=\""
       << px(plot.log_x ? std::pow(10.0, rx.hi) : rx.hi) << "\" y2=\"" << py(ry.hi)
       << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kColors[k % std::size(kColors)];
    if (s.lines && s.xs.size() > 1) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.xs.size(); ++i) os << px(s.xs[i]) << ',' << py(s.ys[i]) << ' ';
      os << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        os << "<circle cx=\"" << px(s.xs[i]) << "\" cy=\"" << py(s.ys[i]) << "\" r=\"2.5\" fill=\"" << color
           << "\" fill-opacity=\"0.6\"/>\n";
      }
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    os << "<rect x=\"" << kLeft + pw + 12 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color
       << "\"/>\n";
    os << "<text x=\"" << kLeft + pw + 28 << "\" y=\"" << ly + 1 << "\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace reldec
