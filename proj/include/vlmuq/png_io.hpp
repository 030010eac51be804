#pragma once

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vlmuq/image.hpp"

namespace vlmuq {

// Lossless 8-bit RGB PNG I/O. Corruption severities depend on exact pixel
// values, so lossy formats are deliberately unsupported. Encoding settings
// are fixed so identical pixels always produce identical files.

namespace detail {
struct PngWriteCtx {
  std::string* out;
};

inline void png_write_to_string(png_structp png, png_bytep data, png_size_t n) {
  auto* ctx = static_cast<PngWriteCtx*>(png_get_io_ptr(png));
  ctx->out->append(reinterpret_cast<const char*>(data), n);
}

inline void png_flush_noop(png_structp) {}

struct PngReadCtx {
  const std::string* data;
  size_t pos;
};

inline void png_read_from_string(png_structp png, png_bytep out, png_size_t n) {
  auto* ctx = static_cast<PngReadCtx*>(png_get_io_ptr(png));
  if (ctx->pos + n > ctx->data->size())
    png_error(png, "png: truncated stream");
  std::memcpy(out, ctx->data->data() + ctx->pos, n);
  ctx->pos += n;
}
}  // namespace detail

inline std::string encode_png(const Image& img) {
  if (img.empty()) throw std::invalid_argument("encode_png: empty image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  std::string out;
  detail::PngWriteCtx ctx{&out};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png encode failed");
  }
  png_set_write_fn(png, &ctx, detail::png_write_to_string, detail::png_flush_noop);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.px(0, y));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline Image decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8))
    throw std::runtime_error("decode_png: not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  detail::PngReadCtx ctx{&bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png decode failed");
  }
  png_set_read_fn(png, &ctx, detail::png_read_from_string);
  png_read_info(png, info);

  // Normalize everything to 8-bit RGB.
  png_byte color = png_get_color_type(png, info);
  png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image img(static_cast<int>(png_get_image_width(png, info)),
            static_cast<int>(png_get_image_height(png, info)));
  if (png_get_rowbytes(png, info) != static_cast<size_t>(img.width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("decode_png: unexpected row size after normalization");
  }
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = img.px(0, y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
  std::string bytes = encode_png(img);
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for write: " + path.string());
  size_t n = std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (n != bytes.size()) throw std::runtime_error("short write: " + path.string());
}

inline Image read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_png(ss.str());
}

}  // namespace vlmuq
