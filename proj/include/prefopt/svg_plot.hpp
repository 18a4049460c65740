#pragma once

#include <string>
#include <vector>

namespace prefopt {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Self-contained SVG line chart: axes with tick labels, one polyline per
// series (plus point markers when a series is short), and a legend. A
// single-point series renders as a marker only.
std::string render_line_chart(const std::string& title,
                              const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<Series>& series,
                              int width = 760, int height = 460);

}  // namespace prefopt
