#pragma once

// Minimal static SVG line plots for curves, fits and collapses.

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace xxz {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> err;  // optional symmetric error bars
  bool dashed = false;
  bool markers = false;
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_x = false;
  std::optional<std::pair<double, double>> y_range;
  std::vector<PlotSeries> series;
  int width = 640;
  int height = 420;
};

void write_svg(std::ostream& os, const PlotSpec& spec);

}  // namespace xxz
