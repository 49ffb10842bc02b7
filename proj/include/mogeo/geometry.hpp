#pragma once

#include <algorithm>
#include <stdexcept>

namespace mogeo {

// Axis-aligned box in pixel coordinates, center + extents.
struct BBox {
  double cx = 0, cy = 0, w = 0, h = 0;

  double x0() const { return cx - w / 2; }
  double x1() const { return cx + w / 2; }
  double y0() const { return cy - h / 2; }
  double y1() const { return cy + h / 2; }
  double area() const { return w * h; }

  bool valid() const { return w > 0 && h > 0; }

  bool inside(double img_w, double img_h) const {
    return x0() >= 0 && x1() <= img_w && y0() >= 0 && y1() <= img_h;
  }
};

// Trim a box to [0,W]x[0,H]; callers guarantee the center is in bounds so
// the result stays non-degenerate. Boxes already inside pass through
// untouched (bit-exact).
inline BBox clip_box(const BBox& b, double img_w, double img_h) {
  BBox out = b;
  const double x0 = std::max(0.0, b.x0()), x1 = std::min(img_w, b.x1());
  if (x0 > b.x0() || x1 < b.x1()) {
    out.cx = (x0 + x1) / 2;
    out.w = x1 - x0;
  }
  const double y0 = std::max(0.0, b.y0()), y1 = std::min(img_h, b.y1());
  if (y0 > b.y0() || y1 < b.y1()) {
    out.cy = (y0 + y1) / 2;
    out.h = y1 - y0;
  }
  return out;
}

// A 2-D query-point annotation, pixel coordinates in the query frame.
struct ClickPoint {
  double x = 0, y = 0;
};

// One localized object: decoded box in reference pixels plus the logistic
// confidence of the selected grid cell.
struct Detection {
  BBox box;
  double confidence = 0;
  int object_index = 0;
};

}  // namespace mogeo
