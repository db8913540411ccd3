#pragma once

#include <array>
#include <span>
#include <vector>

#include "sscalib/geometry.hpp"

namespace sscalib {

/// Signed shoelace area; positive for counter-clockwise vertices in a
/// y-up frame (clockwise on screen when y points down).
double polygon_area(std::span<const Pixel> polygon);

double polygon_perimeter(std::span<const Pixel> polygon, bool closed = true);

/// Andrew's monotone chain. Counter-clockwise (y-up sense), no repeated or
/// collinear vertices.
std::vector<Pixel> convex_hull(std::span<const Pixel> points);

struct RotatedRect {
  Pixel center = Pixel::Zero();
  Pixel axis = Pixel::UnitX();  // unit direction of the `width` side
  double width = 0.0;
  double height = 0.0;

  double area() const { return width * height; }
  std::array<Pixel, 4> corners() const;
};

/// Minimum-area enclosing rectangle of a convex polygon: one side of the
/// optimum is always collinear with a hull edge, so every edge is tried.
RotatedRect min_area_rect(std::span<const Pixel> hull);

/// Douglas-Peucker simplification of a closed polygon.
std::vector<Pixel> simplify_closed(std::span<const Pixel> polygon, double epsilon);

}  // namespace sscalib
