#pragma once

#include <vector>

namespace cgt {

/// Axis-aligned box in pixel coordinates.
struct Box {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept {
    return width() > 0 && height() > 0 ? width() * height() : 0.0;
  }
  bool valid() const noexcept { return x_min < x_max && y_min < y_max; }
  bool operator==(const Box&) const = default;
};

/// Single-class ("person") detection.
struct Detection {
  Box box;
  double score = 0;
  bool operator==(const Detection&) const = default;
};

using GroundTruthBox = Box;
using Boxes = std::vector<Box>;

/// Intersection of a box with the [0,w]x[0,h] canvas.
inline Box clip(const Box& b, double w, double h) noexcept {
  auto c = [](double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); };
  return {c(b.x_min, 0, w), c(b.y_min, 0, h), c(b.x_max, 0, w), c(b.y_max, 0, h)};
}

}  // namespace cgt
