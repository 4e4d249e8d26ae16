#pragma once

#include <string>
#include <vector>

namespace projlab {

struct PlotSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
  /// Draw markers only, no connecting polyline.
  bool scatter = false;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log2_x = false;
  bool log2_y = false;
  std::vector<PlotSeries> series;
  /// Optional horizontal reference line.
  bool has_reference = false;
  double reference = 0.0;
  std::string reference_label;
};

/// Static SVG with axes, ticks, one polyline (or marker set) per series and a
/// legend. Output depends only on the plot contents.
std::string render_svg(const Plot& plot);

}  // namespace projlab
