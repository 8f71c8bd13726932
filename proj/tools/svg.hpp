#pragma once

#include "mfg/stats.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mfglab {

struct LogLogPlot {
  std::string title, xlabel, ylabel;
  std::vector<double> x, y;        // positive values
  std::optional<mfg::LinearFit> fit;  // in log-log coordinates
};

// Self-contained SVG: frame, decade ticks on both axes, points and the
// fitted line with its slope annotated. Non-positive points are skipped.
std::string render_svg(const LogLogPlot& plot);

}  // namespace mfglab
