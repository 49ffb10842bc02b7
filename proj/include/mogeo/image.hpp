#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mogeo {

// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // height * width * 3

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  uint8_t* px(int x, int y) { return pixels.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const uint8_t* px(int x, int y) const {
    return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    uint8_t* p = px(x, y);
    p[0] = r; p[1] = g; p[2] = b;
  }
  bool operator==(const Image& o) const {
    return width == o.width && height == o.height && pixels == o.pixels;
  }
};

void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

struct Rgb {
  uint8_t r, g, b;
};

// h in [0,1), s,v in [0,1]
Rgb hsv_to_rgb(double h, double s, double v);

// Drawing helpers for the visualization exports.
void draw_rect_outline(Image& img, double cx, double cy, double w, double h,
                       Rgb color, int thickness = 2);
void draw_digits(Image& img, int x, int y, int value, Rgb color, int scale = 2);

}  // namespace mogeo
