#include <doctest.h>

#include <random>

#include "afr/error.hpp"
#include "afr/image.hpp"

using namespace afr;

TEST_SUITE("image") {
  TEST_CASE("PNG round trip") {
    std::mt19937 rng(7);
    Image img(37, 19, {0, 0, 0});
    for (auto& b : img.rgb) b = static_cast<std::uint8_t>(rng());
    auto png = encode_png(img);
    CHECK(sniff_media_type(png) == "image/png");
    CHECK(decode_png(png) == img);
    CHECK(encode_png(img) == png);
  }

  TEST_CASE("media sniffing and bad input") {
    CHECK(sniff_media_type("\xFF\xD8\xFF\xE0") == "image/jpeg");
    CHECK(sniff_media_type("GIF89a") == "image/gif");
    CHECK(sniff_media_type(std::string("RIFF\0\0\0\0WEBP", 12)) == "image/webp");
    CHECK(sniff_media_type("hello") == "");
    CHECK_THROWS_AS(decode_png("\x89PNG\r\n\x1a\n garbage"), Error);
    std::string png = encode_png(Image(8, 8, {1, 2, 3}));
    CHECK_THROWS_AS(decode_png(png.substr(0, png.size() / 2)), Error);
  }

  TEST_CASE("blit clips at the border") {
    Image dst(4, 4, {0, 0, 0});
    Image src(3, 3, {9, 9, 9});
    dst.blit(src, 2, 2);
    CHECK(dst.at(3, 3) == Rgb{9, 9, 9});
    CHECK(dst.at(1, 1) == Rgb{0, 0, 0});
  }
}
