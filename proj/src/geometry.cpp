#include "annotruth/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "annotruth/error.hpp"

namespace annotruth {

BoundingBox::BoundingBox(double xmin, double ymin, double xmax, double ymax)
    : xmin_(xmin), ymin_(ymin), xmax_(xmax), ymax_(ymax) {
  if (!std::isfinite(xmin) || !std::isfinite(ymin) || !std::isfinite(xmax) ||
      !std::isfinite(ymax)) {
    throw DataError("bounding box has non-finite coordinates");
  }
  if (!(xmax > xmin) || !(ymax > ymin)) {
    throw DataError(fmt::format("degenerate bounding box ({}, {}, {}, {})", xmin,
                                ymin, xmax, ymax));
  }
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.xmax(), b.xmax()) - std::max(a.xmin(), b.xmin());
  const double h = std::min(a.ymax(), b.ymax()) - std::max(a.ymin(), b.ymin());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  // Unequal boxes must never report a perfect overlap after rounding.
  return std::clamp(inter / uni, 0.0, std::nextafter(1.0, 0.0));
}

}  // namespace annotruth
