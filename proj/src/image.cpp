#include "mogeo/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace mogeo {

namespace {
struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;
}  // namespace

void write_png(const std::string& path, const Image& img) {
  if (img.width <= 0 || img.height <= 0)
    throw std::invalid_argument("write_png: empty image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("write_png: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("write_png: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("write_png: info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png: failure writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<size_t>(y)] =
        const_cast<png_bytep>(img.pixels.data() + static_cast<size_t>(y) * img.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("read_png: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("read_png: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("read_png: info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png: failure reading " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  // normalize everything to 8-bit RGB
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  Image img(static_cast<int>(png_get_image_width(png, info)),
            static_cast<int>(png_get_image_height(png, info)));
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<size_t>(y)] = img.pixels.data() + static_cast<size_t>(y) * img.width * 3;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  auto u8 = [](double t) { return static_cast<uint8_t>(std::lround(255.0 * std::min(1.0, std::max(0.0, t)))); };
  return {u8(r + m), u8(g + m), u8(b + m)};
}

void draw_rect_outline(Image& img, double cx, double cy, double w, double h,
                       Rgb color, int thickness) {
  const int x0 = static_cast<int>(std::lround(cx - w / 2));
  const int x1 = static_cast<int>(std::lround(cx + w / 2));
  const int y0 = static_cast<int>(std::lround(cy - h / 2));
  const int y1 = static_cast<int>(std::lround(cy + h / 2));
  for (int t = 0; t < thickness; ++t) {
    for (int x = x0; x <= x1; ++x) {
      img.set(x, y0 + t, color.r, color.g, color.b);
      img.set(x, y1 - t, color.r, color.g, color.b);
    }
    for (int y = y0; y <= y1; ++y) {
      img.set(x0 + t, y, color.r, color.g, color.b);
      img.set(x1 - t, y, color.r, color.g, color.b);
    }
  }
}

namespace {
// 3x5 digit glyphs, one bit per pixel, rows top to bottom
constexpr uint16_t kDigits[10] = {
    0b111101101101111,  // 0
    0b010110010010111,  // 1
    0b111001111100111,  // 2
    0b111001111001111,  // 3
    0b101101111001001,  // 4
    0b111100111001111,  // 5
    0b111100111101111,  // 6
    0b111001001001001,  // 7
    0b111101111101111,  // 8
    0b111101111001111,  // 9
};
}  // namespace

void draw_digits(Image& img, int x, int y, int value, Rgb color, int scale) {
  std::string s = std::to_string(value);
  int cx = x;
  for (char ch : s) {
    if (ch < '0' || ch > '9') continue;
    const uint16_t glyph = kDigits[ch - '0'];
    for (int gy = 0; gy < 5; ++gy)
      for (int gx = 0; gx < 3; ++gx) {
        const int bit = 14 - (gy * 3 + gx);
        if ((glyph >> bit) & 1)
          for (int sy = 0; sy < scale; ++sy)
            for (int sx = 0; sx < scale; ++sx)
              img.set(cx + gx * scale + sx, y + gy * scale + sy, color.r, color.g, color.b);
      }
    cx += 4 * scale;
  }
}

}  // namespace mogeo
