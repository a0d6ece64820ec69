#include "xxz/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "xxz/error.hpp"

namespace xxz {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#2ca02c", "#ff7f0e", "#d62728", "#9467bd", "#8c564b", "#17becf"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  const double step = (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return t;
}

}  // namespace

void write_svg(std::ostream& os, const PlotSpec& spec) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const auto& s : spec.series) {
    if (s.x.size() != s.y.size()) throw Error(ErrorCode::DimensionMismatch, "plot series x/y lengths differ");
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (spec.log_x && !(s.x[k] > 0.0)) continue;
      const double x = spec.log_x ? std::log10(s.x[k]) : s.x[k];
      if (!std::isfinite(x) || !std::isfinite(s.y[k])) continue;
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
      ylo = std::min(ylo, s.y[k]);
      yhi = std::max(yhi, s.y[k]);
    }
  }
  if (!std::isfinite(xlo)) xlo = 0.0, xhi = 1.0, ylo = 0.0, yhi = 1.0;
  if (xhi == xlo) xhi = xlo + 1.0;
  if (spec.y_range) ylo = spec.y_range->first, yhi = spec.y_range->second;
  if (yhi == ylo) yhi = ylo + 1.0;

  const double ml = 70, mr = 150, mt = 40, mb = 55;
  const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
  auto px = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * pw; };
  auto py = [&](double y) { return mt + (1.0 - (y - ylo) / (yhi - ylo)) * ph; };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(spec.title)
     << "</text>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : nice_ticks(xlo, xhi)) {
    const double x = px(t);
    os << "<line x1=\"" << x << "\" y1=\"" << mt + ph << "\" x2=\"" << x << "\" y2=\"" << mt + ph + 5
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << mt + ph + 18 << "\" text-anchor=\"middle\">"
       << (spec.log_x ? "1e" + num(t) : num(t)) << "</text>\n";
  }
  for (double t : nice_ticks(ylo, yhi)) {
    const double y = py(t);
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << spec.height - 12 << "\" text-anchor=\"middle\">"
     << esc(spec.xlabel) << "</text>\n";
  os << "<text transform=\"translate(18," << mt + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << esc(spec.ylabel) << "</text>\n";

  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    const auto& ser = spec.series[s];
    const char* color = kPalette[s % (sizeof kPalette / sizeof *kPalette)];
    std::string path;
    for (std::size_t k = 0; k < ser.x.size(); ++k) {
      if (spec.log_x && !(ser.x[k] > 0.0)) continue;
      const double x = px(spec.log_x ? std::log10(ser.x[k]) : ser.x[k]);
      const double y = py(std::clamp(ser.y[k], ylo, yhi));
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      path += (path.empty() ? "M" : " L") + num(x) + "," + num(y);
      if (!ser.err.empty() && ser.err[k] > 0.0) {
        os << "<line x1=\"" << num(x) << "\" y1=\"" << num(py(std::clamp(ser.y[k] - ser.err[k], ylo, yhi)))
           << "\" x2=\"" << num(x) << "\" y2=\"" << num(py(std::clamp(ser.y[k] + ser.err[k], ylo, yhi)))
           << "\" stroke=\"" << color << "\" stroke-opacity=\"0.5\"/>\n";
      }
      if (ser.markers) {
        os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      }
    }
    if (!ser.markers && !path.empty()) {
      os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
         << (ser.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    }
    const double ly = mt + 14 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 30 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (ser.dashed ? " stroke-dasharray=\"4,3\"" : "")
       << "/>\n";
    os << "<text x=\"" << ml + pw + 35 << "\" y=\"" << ly + 4 << "\">" << esc(ser.label) << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace xxz
