#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mfglab {

namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 80, kRight = 30, kTop = 40, kBottom = 60;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo, hi;  // log10 range, whole decades
  double pixel_lo, pixel_hi;
  double map(double log_value) const { return pixel_lo + (log_value - lo) / (hi - lo) * (pixel_hi - pixel_lo); }
};

Axis decade_axis(const std::vector<double>& logs, double pixel_lo, double pixel_hi) {
  double lo = 0, hi = 1;
  if (!logs.empty()) {
    lo = std::floor(*std::min_element(logs.begin(), logs.end()));
    hi = std::ceil(*std::max_element(logs.begin(), logs.end()));
    if (hi <= lo) hi = lo + 1;
  }
  return {lo, hi, pixel_lo, pixel_hi};
}

}  // namespace

std::string render_svg(const LogLogPlot& plot) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(plot.x.size(), plot.y.size()); ++i) {
    if (plot.x[i] > 0 && plot.y[i] > 0) {
      lx.push_back(std::log10(plot.x[i]));
      ly.push_back(std::log10(plot.y[i]));
    }
  }
  const Axis ax = decade_axis(lx, kLeft, kWidth - kRight);
  const Axis ay = decade_axis(ly, kHeight - kBottom, kTop);

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(plot.title)
    << "</text>\n";
  s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
    << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int e = static_cast<int>(ax.lo); e <= static_cast<int>(ax.hi); ++e) {
    for (int m = 1; m <= 9; ++m) {
      const double v = e + std::log10(m);
      if (v > ax.hi + 1e-12) break;
      const double px = ax.map(v);
      const double len = m == 1 ? 8 : 4;
      s << "<line x1=\"" << fmt("%.2f", px) << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << fmt("%.2f", px)
        << "\" y2=\"" << kHeight - kBottom - len << "\" stroke=\"black\"/>\n";
      if (m == 1) {
        s << "<text x=\"" << fmt("%.2f", px) << "\" y=\"" << kHeight - kBottom + 18
          << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
      }
    }
  }
  for (int e = static_cast<int>(ay.lo); e <= static_cast<int>(ay.hi); ++e) {
    for (int m = 1; m <= 9; ++m) {
      const double v = e + std::log10(m);
      if (v > ay.hi + 1e-12) break;
      const double py = ay.map(v);
      const double len = m == 1 ? 8 : 4;
      s << "<line x1=\"" << kLeft << "\" y1=\"" << fmt("%.2f", py) << "\" x2=\"" << kLeft + len << "\" y2=\""
        << fmt("%.2f", py) << "\" stroke=\"black\"/>\n";
      if (m == 1) {
        s << "<text x=\"" << kLeft - 10 << "\" y=\"" << fmt("%.2f", py + 4) << "\" text-anchor=\"end\">1e" << e
          << "</text>\n";
      }
    }
  }
  s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">"
    << escape(plot.xlabel) << "</text>\n";
  s << "<text x=\"18\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << kHeight / 2
    << ")\">" << escape(plot.ylabel) << "</text>\n";

  if (plot.fit && !lx.empty()) {
    const double ln10 = std::log(10.0);
    auto line_y = [&](double l10x) { return (plot.fit->intercept + plot.fit->slope * l10x * ln10) / ln10; };
    const double x0 = *std::min_element(lx.begin(), lx.end()), x1 = *std::max_element(lx.begin(), lx.end());
    s << "<line x1=\"" << fmt("%.2f", ax.map(x0)) << "\" y1=\"" << fmt("%.2f", ay.map(line_y(x0))) << "\" x2=\""
      << fmt("%.2f", ax.map(x1)) << "\" y2=\"" << fmt("%.2f", ay.map(line_y(x1)))
      << "\" stroke=\"steelblue\" stroke-dasharray=\"6 4\"/>\n";
    s << "<text x=\"" << kWidth - kRight - 10 << "\" y=\"" << kTop + 20 << "\" text-anchor=\"end\">slope "
      << fmt("%.3f", plot.fit->slope) << " \xC2\xB1 " << fmt("%.3f", plot.fit->slope_se) << "</text>\n";
  }
  for (std::size_t i = 0; i < lx.size(); ++i) {
    s << "<circle cx=\"" << fmt("%.2f", ax.map(lx[i])) << "\" cy=\"" << fmt("%.2f", ay.map(ly[i]))
      << "\" r=\"4\" fill=\"firebrick\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace mfglab
