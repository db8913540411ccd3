#pragma once

#include <span>
#include <vector>

#include "sscalib/geometry.hpp"
#include "sscalib/image.hpp"
#include "sscalib/point_cloud.hpp"
#include "sscalib/registration.hpp"

namespace sscalib {

struct AxisStats {
  std::vector<double> residuals;  // signed, px
  double p25 = 0.0, p50 = 0.0, p75 = 0.0;
  double mean = 0.0;
  double rms = 0.0;
};

struct ReprojectionStats {
  AxisStats u, v;
  double mean = 0.0;  // of Euclidean residuals
  double rms = 0.0;
};

/// Linear interpolation between closest ranks, q in [0, 100].
double percentile(std::vector<double> values, double q);

ReprojectionStats reprojection_stats(const Pose3d& pose, const CorrespondenceSet& corr, const Intrinsics& k);

/// Euclidean residual of each corner as a percentage of the mean projected
/// edge length of its hole (consecutive groups of four corners).
std::vector<double> normalized_reprojection(const Pose3d& pose, const CorrespondenceSet& corr, const Intrinsics& k);

/// Mean Euclidean distance between paired pixels.
double board_drift(std::span<const Pixel> original, std::span<const Pixel> overlaid);

struct UncoloredOptions {
  double board_min_brightness = 120.0;  // gray level separating board from background
  double plane_band = 0.05;             // m, points this close to the board plane are board returns
};

/// Largest distance from a true edge sample to the nearest board-plane point
/// that the colorization painted with board brightness. Background returns
/// are ignored, so camera/LiDAR parallax at depth steps does not count.
double uncolored_distance(std::span<const Vec3> board_edges_true, const PointCloud& colored,
                          const UncoloredOptions& opts = {});

/// Samples every closed polygon edge at `step` meters.
std::vector<Vec3> sample_polygon_edges(std::span<const Vec3> polygon, double step);

/// Assigns bilinear-sampled image color to every point in front of the camera
/// whose distorted projection lands on the raster.
PointCloud colorize(const PointCloud& cloud, const Image& image, const Pose3d& pose, const Intrinsics& k);

/// RGB copy of `image` with each visible point drawn as one pixel, colored by
/// range (near red, far blue).
Image project_overlay(const PointCloud& cloud, const Image& image, const Pose3d& pose, const Intrinsics& k);

}  // namespace sscalib
