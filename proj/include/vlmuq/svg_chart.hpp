#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace vlmuq {

// One polyline on a chart. Dashed strokes distinguish "rejection off" curves
// from their solid "rejection on" counterparts.
struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y), gaps pre-dropped
  bool dashed = false;
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  if (v == std::floor(v) && std::fabs(v) < 1e6)
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  else
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
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

}  // namespace detail

// Static SVG line chart: series over a shared numeric x-axis, auto-scaled
// axes, tick labels, and a legend. Pure string assembly, no dependencies.
inline std::string render_line_chart(const std::string& title, const std::string& x_label,
                                     const std::string& y_label,
                                     const std::vector<ChartSeries>& series,
                                     int width = 720, int height = 440) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                   "#9467bd", "#ff7f0e", "#8c564b"};
  const double ml = 64, mr = 160, mt = 44, mb = 52;  // margins; legend sits right
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = y;
        any = true;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + detail::fmt_num(ml) + "\" y=\"24\" font-size=\"15\" font-weight=\"bold\">" +
         detail::xml_escape(title) + "</text>\n";

  // Axes with 5 ticks each.
  for (int i = 0; i <= 4; ++i) {
    double ty = ymin + (ymax - ymin) * i / 4.0;
    double py = sy(ty);
    svg += "<line x1=\"" + detail::fmt_num(ml) + "\" y1=\"" + detail::fmt_num(py) +
           "\" x2=\"" + detail::fmt_num(ml + pw) + "\" y2=\"" + detail::fmt_num(py) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"" + detail::fmt_num(ml - 8) + "\" y=\"" + detail::fmt_num(py + 4) +
           "\" font-size=\"11\" text-anchor=\"end\">" + detail::fmt_num(ty) + "</text>\n";
    double tx = xmin + (xmax - xmin) * i / 4.0;
    double px = sx(tx);
    svg += "<line x1=\"" + detail::fmt_num(px) + "\" y1=\"" + detail::fmt_num(mt + ph) +
           "\" x2=\"" + detail::fmt_num(px) + "\" y2=\"" + detail::fmt_num(mt + ph + 5) +
           "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + detail::fmt_num(px) + "\" y=\"" + detail::fmt_num(mt + ph + 18) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + detail::fmt_num(tx) + "</text>\n";
  }
  svg += "<line x1=\"" + detail::fmt_num(ml) + "\" y1=\"" + detail::fmt_num(mt) + "\" x2=\"" +
         detail::fmt_num(ml) + "\" y2=\"" + detail::fmt_num(mt + ph) +
         "\" stroke=\"#333333\"/>\n";
  svg += "<line x1=\"" + detail::fmt_num(ml) + "\" y1=\"" + detail::fmt_num(mt + ph) +
         "\" x2=\"" + detail::fmt_num(ml + pw) + "\" y2=\"" + detail::fmt_num(mt + ph) +
         "\" stroke=\"#333333\"/>\n";
  svg += "<text x=\"" + detail::fmt_num(ml + pw / 2) + "\" y=\"" +
         detail::fmt_num(height - 10) + "\" font-size=\"12\" text-anchor=\"middle\">" +
         detail::xml_escape(x_label) + "</text>\n";
  svg += "<text x=\"16\" y=\"" + detail::fmt_num(mt + ph / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         detail::fmt_num(mt + ph / 2) + ")\">" + detail::xml_escape(y_label) + "</text>\n";

  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    if (!s.points.empty()) {
      std::string pts;
      for (auto [x, y] : s.points)
        pts += detail::fmt_num(sx(x)) + "," + detail::fmt_num(sy(y)) + " ";
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"2\"" +
             (s.dashed ? std::string(" stroke-dasharray=\"6,4\"") : std::string()) +
             " points=\"" + pts + "\"/>\n";
      for (auto [x, y] : s.points)
        svg += "<circle cx=\"" + detail::fmt_num(sx(x)) + "\" cy=\"" +
               detail::fmt_num(sy(y)) + "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
    }
    double ly = mt + 14 + 18.0 * double(i);
    svg += "<line x1=\"" + detail::fmt_num(ml + pw + 10) + "\" y1=\"" + detail::fmt_num(ly) +
           "\" x2=\"" + detail::fmt_num(ml + pw + 34) + "\" y2=\"" + detail::fmt_num(ly) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"" +
           (s.dashed ? std::string(" stroke-dasharray=\"6,4\"") : std::string()) + "/>\n";
    svg += "<text x=\"" + detail::fmt_num(ml + pw + 38) + "\" y=\"" +
           detail::fmt_num(ly + 4) + "\" font-size=\"11\">" + detail::xml_escape(s.name) +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace vlmuq
