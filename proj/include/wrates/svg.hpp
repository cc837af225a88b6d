#pragma once

#include <string>
#include <vector>

namespace wrates {

// One plotted series. Points with optional error bars and/or a polyline
// through the data, all on log10-log10 axes.
struct SvgSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_err;  // empty -> no bars
  std::string label;
  std::string color = "#1f77b4";
  bool draw_points = true;
  bool draw_line = false;
};

// Minimal static log-log chart. Nonpositive coordinates are skipped.
std::string render_loglog_svg(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<SvgSeries>& series, int width = 720,
                              int height = 540);

}  // namespace wrates
