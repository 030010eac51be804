#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace vlmuq {

// 8-bit interleaved RGB image. All corpus operations work on this type.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // width * height * 3, row-major

  Image() = default;
  Image(int w, int h, uint8_t fill = 0)
      : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, fill) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("image dimensions must be positive");
  }

  bool empty() const { return rgb.empty(); }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }

  uint8_t* px(int x, int y) { return &rgb[(static_cast<size_t>(y) * width + x) * 3]; }
  const uint8_t* px(int x, int y) const {
    return &rgb[(static_cast<size_t>(y) * width + x) * 3];
  }

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    uint8_t* p = px(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  bool operator==(const Image& o) const {
    return width == o.width && height == o.height && rgb == o.rgb;
  }
};

// Peak signal-to-noise ratio between two equally sized images, in dB.
// Identical images give +inf.
inline double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("psnr: size mismatch");
  if (a.rgb.empty()) throw std::invalid_argument("psnr: empty image");
  double se = 0.0;
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    double d = double(a.rgb[i]) - double(b.rgb[i]);
    se += d * d;
  }
  double mse = se / double(a.rgb.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace vlmuq
