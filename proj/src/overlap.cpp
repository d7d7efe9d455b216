#include "annotruth/overlap.hpp"

#include <algorithm>

#include "annotruth/error.hpp"

namespace annotruth {

Mask::Mask(std::size_t width, std::size_t height)
    : width_(width), height_(height), pixels_(width * height, 0) {}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(pixels_.begin(), pixels_.end(), 1));
}

Mask rasterize_polygon(std::span<const Point> polygon, std::size_t width,
                       std::size_t height) {
  Mask mask(width, height);
  const std::size_t n = polygon.size();
  if (n < 3) return mask;
  for (std::size_t y = 0; y < height; ++y) {
    const double py = static_cast<double>(y) + 0.5;
    for (std::size_t x = 0; x < width; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      bool inside = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = polygon[i];
        const Point& b = polygon[j];
        if ((a.y > py) != (b.y > py) &&
            px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x) {
          inside = !inside;
        }
      }
      if (inside) mask.set(x, y);
    }
  }
  return mask;
}

namespace {

struct Overlap {
  std::size_t a = 0, b = 0, both = 0;
};

Overlap overlap(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DataError("masks have different frames");
  }
  Overlap o;
  for (std::size_t y = 0; y < a.height(); ++y) {
    for (std::size_t x = 0; x < a.width(); ++x) {
      const bool pa = a.at(x, y), pb = b.at(x, y);
      o.a += pa;
      o.b += pb;
      o.both += pa && pb;
    }
  }
  return o;
}

}  // namespace

double dice(const Mask& a, const Mask& b) {
  const Overlap o = overlap(a, b);
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double mask_iou(const Mask& a, const Mask& b) {
  const Overlap o = overlap(a, b);
  const std::size_t uni = o.a + o.b - o.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.both) / static_cast<double>(uni);
}

}  // namespace annotruth
