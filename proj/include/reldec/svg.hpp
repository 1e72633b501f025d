#pragma once

#include <string>
#include <vector>

namespace reldec {

struct PlotSeries {
  std::string name;
  std::vector<double> xs, ys;
  bool lines = true;  // false: markers only
};

struct Plot {
  std::string title, x_label, y_label;
  std::vector<PlotSeries> series;
  bool diagonal = false;  // draw y = x
  bool log_x = false;
};

// Self-contained SVG document, 640x440.
std::string render_svg(const Plot& plot);

}  // namespace reldec
