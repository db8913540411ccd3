#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sscalib/geometry.hpp"
#include "sscalib/image.hpp"

namespace sscalib {

struct ContourShape {
  std::vector<Pixel> pixels;  // closed 8-connected boundary chain
  bool is_hole_border = false;
  double area = 0.0;
  double perimeter = 0.0;
  double hull_area = 0.0;
  double mer_area = 0.0;
};

/// Fills the metric fields from `pixels`.
ContourShape make_contour(std::vector<Pixel> pixels, bool is_hole_border);

struct ImageThresholds {
  // Non-positive means "derive from the image size" (0.1% and 20% of it).
  double area_min = 0.0;
  double area_max = 0.0;
  double rectangularity_max = 1.15;
  std::array<double, 2> circularity_range = {0.6, 0.9};

  ImageThresholds resolved(int width, int height) const;
  void validate() const;
};

struct CornerQuad {
  std::array<Pixel, 4> corners;  // UL, UR, LR, LL
  int contour_id = -1;

  Pixel centroid() const { return 0.25 * (corners[0] + corners[1] + corners[2] + corners[3]); }
};

/// Undistorted image: every output pixel samples the source at its distorted
/// location. Zero coefficients return the input unchanged.
Image rectify(const Image& img, const Intrinsics& k);

int otsu_threshold(const Image& gray);

/// 255 where gray > Otsu threshold, 0 elsewhere.
Image binarize(const Image& gray);

/// Border following on a binary image (nonzero = foreground, 8-connected).
std::vector<ContourShape> trace_contours(const Image& binary);

double rectangularity(const ContourShape& c);
double circularity(const ContourShape& c);

/// Indices of the accepted hole borders; exactly `expected` must survive.
std::vector<std::size_t> contour_filter(const std::vector<ContourShape>& contours, const ImageThresholds& th,
                                        std::size_t expected = 4);

/// Canonical cycle starting at the corner nearest the upper-left direction.
std::array<Pixel, 4> order_quad_corners(const std::array<Pixel, 4>& corners);

CornerQuad extract_quad(const ContourShape& c, std::uint64_t seed, int contour_id = -1);

/// Quads grouped into boards left to right, 2x2 row-major inside each board,
/// flattened as quad_index * 4 + corner_index.
std::vector<Pixel> order_quads(std::vector<CornerQuad> quads);

struct ImageExtraction {
  Image rectified;
  Image binary;
  std::vector<ContourShape> contours;
  std::vector<std::size_t> selected;
  std::vector<CornerQuad> quads;
  std::vector<Pixel> corners;
};

ImageExtraction extract_image_corners(const Image& img, const Intrinsics& k, const ImageThresholds& th,
                                      int boards = 1, std::uint64_t seed = 0);

}  // namespace sscalib
