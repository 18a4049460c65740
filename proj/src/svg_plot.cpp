#include "prefopt/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "prefopt/error.hpp"

namespace prefopt {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
constexpr size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;
};

Range padded_range(double lo, double hi) {
  if (!(lo <= hi)) return {0.0, 1.0};
  if (lo == hi) {
    const double pad = std::max(std::abs(lo) * 0.1, 1e-6);
    return {lo - pad, hi + pad};
  }
  return {lo, hi};
}

// Tick spacing rounded to a 1/2/5 decade multiple.
double nice_step(double range, int target_ticks) {
  const double raw = range / std::max(target_ticks, 1);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  if (frac <= 1.0) return mag;
  if (frac <= 2.0) return 2.0 * mag;
  if (frac <= 5.0) return 5.0 * mag;
  return 10.0 * mag;
}

}  // namespace

std::string render_line_chart(const std::string& title,
                              const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<Series>& series, int width,
                              int height) {
  if (series.empty()) fail(ErrKind::value, "render_line_chart: no series");
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      fail(ErrKind::shape, "render_line_chart: series '", s.label, "' has ",
           s.x.size(), " x values and ", s.y.size(), " y values");
    if (s.x.empty())
      fail(ErrKind::value, "render_line_chart: series '", s.label, "' is empty");
    for (double v : s.x)
      if (!std::isfinite(v))
        fail(ErrKind::value, "render_line_chart: non-finite x in '", s.label, "'");
    for (double v : s.y)
      if (!std::isfinite(v))
        fail(ErrKind::value, "render_line_chart: non-finite y in '", s.label, "'");
  }

  double xmin = series[0].x[0], xmax = xmin, ymin = series[0].y[0], ymax = ymin;
  size_t max_points = 0;
  for (const auto& s : series) {
    max_points = std::max(max_points, s.x.size());
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  const Range xr = padded_range(xmin, xmax);
  const Range yr = padded_range(ymin, ymax);

  const double left = 64, right = 16, top = 30, bottom = 46;
  const double pw = width - left - right;
  const double ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) {
    return top + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << esc(title) << "</text>\n";

  const double xstep = nice_step(xr.hi - xr.lo, 6);
  const double ystep = nice_step(yr.hi - yr.lo, 5);
  svg << "<g font-family=\"sans-serif\" font-size=\"10\" fill=\"#333\">\n";
  for (double t = std::ceil(xr.lo / xstep) * xstep; t <= xr.hi + 1e-9 * xstep;
       t += xstep) {
    const double x = px(t);
    svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(top) << "\" x2=\""
        << num(x) << "\" y2=\"" << num(top + ph)
        << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(x) << "\" y=\"" << num(top + ph + 14)
        << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  for (double t = std::ceil(yr.lo / ystep) * ystep; t <= yr.hi + 1e-9 * ystep;
       t += ystep) {
    const double y = py(t);
    svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(left + pw) << "\" y2=\"" << num(y)
        << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 3)
        << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  svg << "</g>\n";

  svg << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\""
      << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">"
      << esc(x_label) << "</text>\n";
  svg << "<text x=\"14\" y=\"" << num(top + ph / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 14 "
      << num(top + ph / 2) << ")\">" << esc(y_label) << "</text>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    const auto& sr = series[s];
    if (sr.x.size() >= 2) {
      svg << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < sr.x.size(); ++i)
        svg << num(px(sr.x[i])) << "," << num(py(sr.y[i])) << " ";
      svg << "\"/>\n";
    }
    if (sr.x.size() <= 64) {
      for (size_t i = 0; i < sr.x.size(); ++i)
        svg << "<circle cx=\"" << num(px(sr.x[i])) << "\" cy=\""
            << num(py(sr.y[i])) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
  }

  const double legend_x = left + pw - 150;
  double legend_y = top + 10;
  svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    svg << "<line x1=\"" << num(legend_x) << "\" y1=\"" << num(legend_y - 3)
        << "\" x2=\"" << num(legend_x + 18) << "\" y2=\"" << num(legend_y - 3)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(legend_x + 24) << "\" y=\"" << num(legend_y)
        << "\">" << esc(series[s].label) << "</text>\n";
    legend_y += 15;
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

}  // namespace prefopt
