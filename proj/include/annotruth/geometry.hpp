#pragma once

#include <compare>

namespace annotruth {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

// Axis-aligned box in image coordinates (y grows downward). Construction
// rejects degenerate boxes, so every BoundingBox has positive area.
class BoundingBox {
 public:
  BoundingBox(double xmin, double ymin, double xmax, double ymax);

  double xmin() const { return xmin_; }
  double ymin() const { return ymin_; }
  double xmax() const { return xmax_; }
  double ymax() const { return ymax_; }
  double width() const { return xmax_ - xmin_; }
  double height() const { return ymax_ - ymin_; }
  double area() const { return width() * height(); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double xmin_;
  double ymin_;
  double xmax_;
  double ymax_;
};

double intersection_area(const BoundingBox& a, const BoundingBox& b);

// Intersection over union in [0, 1]; exactly 0 for boxes with disjoint
// interiors and exactly 1 for equal boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

}  // namespace annotruth
