#include "afr/image.hpp"

#include <zlib.h>

#include <array>
#include <cstdlib>
#include <cstring>

#include "afr/error.hpp"

namespace afr {

Image::Image(int w, int h, Rgb fill) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = fill.r;
    rgb[i + 1] = fill.g;
    rgb[i + 2] = fill.b;
  }
}

Rgb Image::at(int x, int y) const {
  std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
  std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  rgb[i] = c.r;
  rgb[i + 1] = c.g;
  rgb[i + 2] = c.b;
}

void Image::blit(const Image& src, int dst_x, int dst_y) {
  for (int y = 0; y < src.height; ++y) {
    int ty = dst_y + y;
    if (ty < 0 || ty >= height) continue;
    for (int x = 0; x < src.width; ++x) {
      int tx = dst_x + x;
      if (tx >= 0 && tx < width) set(tx, ty, src.at(x, y));
    }
  }
}

namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

std::uint32_t get_u32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put_chunk(std::string& out, const char type[4], std::string_view data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body.append(data);
  out.append(body);
  uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

[[noreturn]] void bad_png(const std::string& why) { throw Error(Errc::unsupported_image, "PNG: " + why); }

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::string encode_png(const Image& img) {
  std::string raw;
  raw.reserve(static_cast<std::size_t>(img.height) * (1 + img.width * 3));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(img.rgb.data()) + static_cast<std::size_t>(y) * img.width * 3,
               static_cast<std::size_t>(img.width) * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string z(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &bound, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw Error(Errc::io_error, "zlib compression failed");
  z.resize(bound);

  std::string out(reinterpret_cast<const char*>(kPngSignature), 8);
  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

Image decode_png(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || std::memcmp(p, kPngSignature, 8) != 0) bad_png("bad signature");
  std::size_t pos = 8;
  std::uint32_t w = 0, h = 0;
  int color_type = -1;
  std::string idat;
  bool seen_end = false;
  while (pos + 12 <= bytes.size()) {
    std::uint32_t len = get_u32(p + pos);
    if (len > bytes.size() - pos - 12) bad_png("truncated chunk");
    std::string_view type(bytes.data() + pos + 4, 4);
    const unsigned char* data = p + pos + 8;
    if (type == "IHDR") {
      if (len != 13) bad_png("bad IHDR");
      w = get_u32(data);
      h = get_u32(data + 4);
      if (data[8] != 8) bad_png("only 8-bit depth supported");
      color_type = data[9];
      if (data[12] != 0) bad_png("interlaced images unsupported");
    } else if (type == "IDAT") {
      idat.append(reinterpret_cast<const char*>(data), len);
    } else if (type == "IEND") {
      seen_end = true;
      break;
    }
    pos += 12 + len;
  }
  if (!seen_end || color_type < 0) bad_png("missing IHDR or IEND");
  int channels = 0;
  switch (color_type) {
    case 0: channels = 1; break;
    case 2: channels = 3; break;
    case 4: channels = 2; break;
    case 6: channels = 4; break;
    default: bad_png("unsupported color type");
  }
  if (w == 0 || h == 0 || static_cast<std::uint64_t>(w) * h > (1u << 28)) bad_png("bad dimensions");

  std::size_t stride = static_cast<std::size_t>(w) * channels;
  uLongf raw_len = static_cast<uLongf>((stride + 1) * h);
  std::string raw(raw_len, '\0');
  if (uncompress(reinterpret_cast<Bytef*>(raw.data()), &raw_len, reinterpret_cast<const Bytef*>(idat.data()),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    bad_png("corrupt image data");

  std::vector<unsigned char> prev(stride, 0), cur(stride);
  Image img(static_cast<int>(w), static_cast<int>(h), Rgb{});
  for (std::uint32_t y = 0; y < h; ++y) {
    const auto* line = reinterpret_cast<const unsigned char*>(raw.data()) + y * (stride + 1);
    int filter = line[0];
    for (std::size_t i = 0; i < stride; ++i) {
      int a = i >= static_cast<std::size_t>(channels) ? cur[i - channels] : 0;
      int b = prev[i];
      int c = i >= static_cast<std::size_t>(channels) ? prev[i - channels] : 0;
      int x = line[1 + i];
      switch (filter) {
        case 0: break;
        case 1: x += a; break;
        case 2: x += b; break;
        case 3: x += (a + b) / 2; break;
        case 4: x += paeth(a, b, c); break;
        default: bad_png("bad filter type");
      }
      cur[i] = static_cast<unsigned char>(x & 0xFF);
    }
    for (std::uint32_t x = 0; x < w; ++x) {
      const unsigned char* px = cur.data() + static_cast<std::size_t>(x) * channels;
      Rgb c = channels >= 3 ? Rgb{px[0], px[1], px[2]} : Rgb{px[0], px[0], px[0]};
      img.set(static_cast<int>(x), static_cast<int>(y), c);
    }
    std::swap(prev, cur);
  }
  return img;
}

std::string_view sniff_media_type(std::string_view b) {
  if (b.size() >= 8 && std::memcmp(b.data(), kPngSignature, 8) == 0) return "image/png";
  if (b.size() >= 3 && static_cast<unsigned char>(b[0]) == 0xFF && static_cast<unsigned char>(b[1]) == 0xD8 &&
      static_cast<unsigned char>(b[2]) == 0xFF)
    return "image/jpeg";
  if (b.size() >= 12 && b.substr(0, 4) == "RIFF" && b.substr(8, 4) == "WEBP") return "image/webp";
  if (b.size() >= 6 && (b.substr(0, 6) == "GIF87a" || b.substr(0, 6) == "GIF89a")) return "image/gif";
  return "";
}

}  // namespace afr
