#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vlmuq/image.hpp"

namespace vlmuq {

enum class CorruptionKind { kGaussianNoise, kDefocusBlur, kPixelate };

inline const char* corruption_kind_name(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::kGaussianNoise: return "gaussian_noise";
    case CorruptionKind::kDefocusBlur: return "defocus_blur";
    case CorruptionKind::kPixelate: return "pixelate";
  }
  return "?";
}

inline CorruptionKind corruption_kind_from_name(const std::string& name) {
  if (name == "gaussian_noise") return CorruptionKind::kGaussianNoise;
  if (name == "defocus_blur") return CorruptionKind::kDefocusBlur;
  if (name == "pixelate") return CorruptionKind::kPixelate;
  throw std::invalid_argument("unknown corruption kind: " + name);
}

// Per-severity parameters, indexed by severity 0..5. Entry 0 is the identity
// (sigma 0 / radius 0 / factor 1). Values are overridable via config.
struct CorruptionTables {
  std::array<double, 6> gaussian_sigma{0.0, 0.08, 0.12, 0.18, 0.26, 0.38};  // on [0,1] scale
  std::array<int, 6> defocus_radius{0, 3, 4, 6, 8, 10};                     // px
  std::array<double, 6> pixelate_fraction{1.0, 0.6, 0.5, 0.4, 0.3, 0.25};   // of original size
};

namespace detail {
inline void check_severity(int severity) {
  if (severity < 0 || severity > 5)
    throw std::invalid_argument("severity must be in [0,5], got " + std::to_string(severity));
}

inline uint8_t clamp_u8(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}
}  // namespace detail

// Additive zero-mean Gaussian noise at the per-severity sigma.
// Deterministic given (image, severity, seed); severity 0 returns a copy.
inline Image apply_gaussian_noise(const Image& img, int severity, uint64_t seed,
                                  const CorruptionTables& tables = {}) {
  detail::check_severity(severity);
  if (img.empty()) throw std::invalid_argument("apply_gaussian_noise: empty image");
  Image out = img;
  double sigma = tables.gaussian_sigma[severity] * 255.0;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& v : out.rgb) v = detail::clamp_u8(double(v) + noise(rng));
  return out;
}

// Normalized disk kernel of the given radius; side = 2*radius + 1.
// radius 0 degenerates to the identity kernel.
inline std::vector<double> disk_kernel(int radius, int& side) {
  if (radius < 0) throw std::invalid_argument("disk_kernel: negative radius");
  side = 2 * radius + 1;
  std::vector<double> k(static_cast<size_t>(side) * side, 0.0);
  double r2 = double(radius) * radius;
  double total = 0.0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (double(dx) * dx + double(dy) * dy <= r2) {
        k[(dy + radius) * side + (dx + radius)] = 1.0;
        total += 1.0;
      }
  for (auto& v : k) v /= total;
  return k;
}

// Float-domain disk convolution over one plane, replicate borders. This is the
// operator core; tests exercise it directly for energy conservation.
inline std::vector<double> convolve_disk(const std::vector<double>& plane, int w, int h,
                                         int radius) {
  if (static_cast<size_t>(w) * h != plane.size())
    throw std::invalid_argument("convolve_disk: plane size mismatch");
  int side = 0;
  std::vector<double> kernel = disk_kernel(radius, side);
  std::vector<double> out(plane.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        int sy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -radius; dx <= radius; ++dx) {
          double kv = kernel[(dy + radius) * side + (dx + radius)];
          if (kv == 0.0) continue;
          int sx = std::clamp(x + dx, 0, w - 1);
          acc += kv * plane[static_cast<size_t>(sy) * w + sx];
        }
      }
      out[static_cast<size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

// Disk-kernel blur at the per-severity radius. Severity 0 returns a copy.
inline Image apply_defocus_blur(const Image& img, int severity,
                                const CorruptionTables& tables = {}) {
  detail::check_severity(severity);
  if (img.empty()) throw std::invalid_argument("apply_defocus_blur: empty image");
  int radius = tables.defocus_radius[severity];
  if (radius == 0) return img;
  Image out = img;
  size_t n = img.pixel_count();
  std::vector<double> plane(n);
  for (int c = 0; c < 3; ++c) {
    for (size_t i = 0; i < n; ++i) plane[i] = double(img.rgb[i * 3 + c]);
    std::vector<double> blurred = convolve_disk(plane, img.width, img.height, radius);
    for (size_t i = 0; i < n; ++i) out.rgb[i * 3 + c] = detail::clamp_u8(blurred[i]);
  }
  return out;
}

// Box-downsample to (round(w*f), round(h*f)) then nearest-neighbor upsample
// back to the original size. fraction 1 returns a copy.
inline Image pixelate(const Image& img, double fraction) {
  if (img.empty()) throw std::invalid_argument("pixelate: empty image");
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("pixelate: fraction must be in (0,1]");
  if (fraction == 1.0) return img;
  int dw = std::max(1, static_cast<int>(std::lround(img.width * fraction)));
  int dh = std::max(1, static_cast<int>(std::lround(img.height * fraction)));
  if (img.width < 1 || img.height < 1 || dw > img.width || dh > img.height)
    throw std::invalid_argument("pixelate: image smaller than downsample grid");

  // Each down-pixel averages a contiguous box of source pixels; the boxes
  // partition the image exactly.
  Image down(dw, dh);
  for (int by = 0; by < dh; ++by) {
    int y0 = static_cast<int>(static_cast<int64_t>(by) * img.height / dh);
    int y1 = static_cast<int>(static_cast<int64_t>(by + 1) * img.height / dh);
    for (int bx = 0; bx < dw; ++bx) {
      int x0 = static_cast<int>(static_cast<int64_t>(bx) * img.width / dw);
      int x1 = static_cast<int>(static_cast<int64_t>(bx + 1) * img.width / dw);
      uint64_t sum[3] = {0, 0, 0};
      uint64_t count = static_cast<uint64_t>(y1 - y0) * (x1 - x0);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const uint8_t* p = img.px(x, y);
          sum[0] += p[0];
          sum[1] += p[1];
          sum[2] += p[2];
        }
      down.set(bx, by, static_cast<uint8_t>((sum[0] + count / 2) / count),
               static_cast<uint8_t>((sum[1] + count / 2) / count),
               static_cast<uint8_t>((sum[2] + count / 2) / count));
    }
  }

  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    int sy = static_cast<int>(static_cast<int64_t>(y) * dh / img.height);
    for (int x = 0; x < img.width; ++x) {
      int sx = static_cast<int>(static_cast<int64_t>(x) * dw / img.width);
      const uint8_t* p = down.px(sx, sy);
      out.set(x, y, p[0], p[1], p[2]);
    }
  }
  return out;
}

inline Image apply_pixelate(const Image& img, int severity,
                            const CorruptionTables& tables = {}) {
  detail::check_severity(severity);
  return pixelate(img, tables.pixelate_fraction[severity]);
}

// Dispatch over the three kinds; the seed only matters for noise.
inline Image apply_corruption(const Image& img, CorruptionKind kind, int severity,
                              uint64_t seed, const CorruptionTables& tables = {}) {
  switch (kind) {
    case CorruptionKind::kGaussianNoise: return apply_gaussian_noise(img, severity, seed, tables);
    case CorruptionKind::kDefocusBlur: return apply_defocus_blur(img, severity, tables);
    case CorruptionKind::kPixelate: return apply_pixelate(img, severity, tables);
  }
  throw std::invalid_argument("apply_corruption: bad kind");
}

}  // namespace vlmuq
