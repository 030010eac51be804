#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "vlmuq/image.hpp"
#include "vlmuq/rng.hpp"

namespace vlmuq {

// Recipe for one synthetic non-ECG line image: random x and y series, each
// from an independently chosen distribution family, plotted as a thin black
// polyline on white.
struct EcgAnomalySpec {
  uint64_t seed = 0;
  int n_points = 128;
  std::optional<DistFamily> dist_family;  // unset: drawn uniformly per axis
  double param = 0.6;
  double line_width_px = 0.8;
  int canvas_width = 448;
  int canvas_height = 448;

  void validate() const {
    if (n_points < 2) throw std::invalid_argument("ecg spec: n_points must be >= 2");
    if (param <= 0.0) throw std::invalid_argument("ecg spec: param must be positive");
    if (line_width_px <= 0.0) throw std::invalid_argument("ecg spec: line width must be positive");
    if (canvas_width < 8 || canvas_height < 8)
      throw std::invalid_argument("ecg spec: canvas too small");
  }
};

struct PointF {
  double x;
  double y;
};

// The raw polyline in data coordinates, before scaling or rasterization.
// Exactly spec.n_points vertices.
inline std::vector<PointF> make_ecg_polyline(const EcgAnomalySpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  DistFamily fx = spec.dist_family ? *spec.dist_family : pick_family(rng);
  std::vector<double> xs = draw_family(rng, fx, spec.param, spec.n_points);
  DistFamily fy = spec.dist_family ? *spec.dist_family : pick_family(rng);
  std::vector<double> ys = draw_family(rng, fy, spec.param, spec.n_points);
  std::vector<PointF> pts(static_cast<size_t>(spec.n_points));
  for (int i = 0; i < spec.n_points; ++i) pts[i] = {xs[i], ys[i]};
  return pts;
}

namespace detail {
inline double dist_to_segment(double px, double py, PointF a, PointF b) {
  double vx = b.x - a.x, vy = b.y - a.y;
  double len2 = vx * vx + vy * vy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - a.x) * vx + (py - a.y) * vy) / len2, 0.0, 1.0);
  double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}
}  // namespace detail

// Coverage-based anti-aliased polyline rasterizer: pixels darken with the
// fraction of their footprint covered by the stroke. Points are in pixel
// coordinates. Black on white.
inline Image rasterize_polyline(const std::vector<PointF>& pts, int width, int height,
                                double line_width_px) {
  if (pts.size() < 2) throw std::invalid_argument("rasterize_polyline: need >= 2 points");
  Image img(width, height, 255);
  std::vector<double> ink(static_cast<size_t>(width) * height, 0.0);
  double half = line_width_px / 2.0;
  const double aa = 1.0;  // coverage falloff width in px
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    PointF a = pts[i], b = pts[i + 1];
    int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half - aa)));
    int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + half + aa)));
    int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half - aa)));
    int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + half + aa)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double d = detail::dist_to_segment(x + 0.5, y + 0.5, a, b);
        double cov = std::clamp((half + aa / 2.0 - d) / aa, 0.0, 1.0);
        if (cov > 0.0) {
          double& cell = ink[static_cast<size_t>(y) * width + x];
          cell = std::max(cell, cov);  // max blend avoids double-darkened joints
        }
      }
    }
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double cov = ink[static_cast<size_t>(y) * width + x];
      auto v = static_cast<uint8_t>(std::lround(255.0 * (1.0 - cov)));
      img.set(x, y, v, v, v);
    }
  return img;
}

// Full generator: draw the series, auto-scale into the canvas with margins,
// rasterize. Deterministic given spec.seed.
inline Image generate_ecg_anomaly(const EcgAnomalySpec& spec) {
  std::vector<PointF> pts = make_ecg_polyline(spec);

  double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  if (xmax == xmin && ymax == ymin)
    throw std::runtime_error("generate_ecg_anomaly: degenerate series, all points identical");

  const double margin = 0.05;
  double mx = margin * spec.canvas_width;
  double my = margin * spec.canvas_height;
  double spanx = spec.canvas_width - 1 - 2 * mx;
  double spany = spec.canvas_height - 1 - 2 * my;
  std::vector<PointF> scaled(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    double sx = (xmax > xmin) ? mx + (pts[i].x - xmin) / (xmax - xmin) * spanx
                              : spec.canvas_width / 2.0;
    // Flip y so larger values plot higher, as a plotting library would.
    double sy = (ymax > ymin) ? my + (ymax - pts[i].y) / (ymax - ymin) * spany
                              : spec.canvas_height / 2.0;
    scaled[i] = {sx, sy};
  }
  return rasterize_polyline(scaled, spec.canvas_width, spec.canvas_height,
                            spec.line_width_px);
}

// Fraction of canvas pixels that are not pure white.
inline double ink_fraction(const Image& img) {
  size_t inked = 0;
  for (size_t i = 0; i < img.pixel_count(); ++i)
    if (img.rgb[i * 3] != 255 || img.rgb[i * 3 + 1] != 255 || img.rgb[i * 3 + 2] != 255)
      ++inked;
  return double(inked) / double(img.pixel_count());
}

}  // namespace vlmuq
