#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace afr {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
  auto operator<=>(const Rgb&) const = default;
};

// 8-bit RGB raster, row-major, top row first.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, Rgb fill);

  bool empty() const { return width == 0 || height == 0; }
  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  void blit(const Image& src, int dst_x, int dst_y);

  bool operator==(const Image&) const = default;
};

// Lossless PNG (8-bit RGB, filter 0, zlib level 6).
std::string encode_png(const Image& img);

// Decodes non-interlaced 8-bit gray / RGB / RGBA / gray-alpha PNGs (alpha is
// dropped). Throws Error(unsupported_image) otherwise.
Image decode_png(std::string_view bytes);

// "image/png", "image/jpeg", "image/webp", "image/gif" or "" by magic bytes.
std::string_view sniff_media_type(std::string_view bytes);

}  // namespace afr
