#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "annotruth/geometry.hpp"

namespace annotruth {

// Row-major binary mask.
class Mask {
 public:
  Mask(std::size_t width, std::size_t height);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  bool at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x] != 0; }
  void set(std::size_t x, std::size_t y, bool value = true) {
    pixels_[y * width_ + x] = value ? 1 : 0;
  }
  std::size_t count() const;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> pixels_;
};

// Pixels whose centres (x + 0.5, y + 0.5) fall inside the polygon under the
// even-odd rule.
Mask rasterize_polygon(std::span<const Point> polygon, std::size_t width,
                       std::size_t height);

// 2|A n B| / (|A| + |B|); 1.0 when both masks are empty. Throws DataError
// when the frames differ.
double dice(const Mask& a, const Mask& b);

// |A n B| / |A u B|; 1.0 when both masks are empty.
double mask_iou(const Mask& a, const Mask& b);

}  // namespace annotruth
