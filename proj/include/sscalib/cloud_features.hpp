#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sscalib/geometry.hpp"
#include "sscalib/point_cloud.hpp"

namespace sscalib {

struct CloudThresholds {
  double margin_step_deg = 0.20;
  double range_threshold = 0.2;
  double plane_threshold = 0.05;
  double line_threshold = 0.01;
  double sparseness_radius = 0.05;
  int sparseness_min_count = 5;
  double board_length = 1.2;
  double hole_edge = 0.2;
  double deflation_sigma = 0.02;
  double deflation_multiplier = 1.0;
  // A range mode may serve as frontier only if it holds at least this
  // fraction of the densest mode's population.
  double mode_population_gate = 0.25;
  // A lone return cannot establish a surface.
  int mode_min_points = 2;

  /// Throws InvalidThreshold naming the first offending field.
  void validate() const;
};

struct RansacOptions {
  int max_iterations = 500;
  int min_support = 20;
  int min_models = 1;
  int max_models = 3;
};

inline RansacOptions default_plane_ransac() { return {500, 20, 1, 3}; }
inline RansacOptions default_line_ransac() { return {300, 6, 1, 12}; }

struct Voxel {
  int elevation_bin = 0;
  int azimuth_bin = 0;
  std::vector<Vec3> points;
  std::vector<std::uint32_t> source;  // index into the input cloud
};

struct VoxelGrid {
  double step_deg = 0.0;
  double fov_deg = 0.0;
  int bins = 0;  // per axis
  std::vector<Voxel> cells;  // nonempty cells, ordered by (elevation, azimuth) bin
};

struct MarginPointSet {
  std::vector<Vec3> points;
  std::vector<std::uint32_t> voxel;   // index into VoxelGrid::cells
  std::vector<std::uint32_t> source;  // index into the input cloud

  std::size_t size() const { return points.size(); }
};

/// Elevation/azimuth of a LiDAR-frame point, degrees.
double elevation_deg(const Vec3& p);
double azimuth_deg(const Vec3& p);

VoxelGrid voxelize(std::span<const Vec3> cloud, const CloudThresholds& th, double fov_deg);

/// 1-D flat-kernel mean shift over ranges. Returns indices (into `points`)
/// of the members of the nearest mode that passes the population gate.
std::vector<std::size_t> meanshift_frontier(std::span<const Vec3> points, const CloudThresholds& th);

/// Indices of the points within multiplier * sigma of the densest range mode.
std::vector<std::size_t> deflate(std::span<const Vec3> frontier, const CloudThresholds& th);

MarginPointSet extract_margins(const VoxelGrid& grid, const CloudThresholds& th);

MarginPointSet sparseness_filter(const MarginPointSet& margins, const CloudThresholds& th);

/// Planes by descending support. Normals point towards the origin side.
std::vector<Plane> ransac_plane(std::span<const Vec3> points, const CloudThresholds& th,
                                const RansacOptions& opts = default_plane_ransac(), std::uint64_t seed = 0);

/// Planes whose inlier footprint matches a board_length square within 20%.
std::vector<std::size_t> select_board_planes(std::span<const Plane> planes, const CloudThresholds& th);

std::vector<SpatialLine> ransac_lines(const Plane& plane, const CloudThresholds& th,
                                      const RansacOptions& opts = default_line_ransac(), std::uint64_t seed = 0);

struct FusedLines {
  Vec3 horizontal = Vec3::UnitY();
  Vec3 vertical = Vec3::UnitZ();
  std::vector<SpatialLine> lines;  // labeled copies of the input
};

FusedLines classify_fuse_lines(std::span<const SpatialLine> lines);

/// Support-weighted mean of sign-aligned unit directions, normalized.
Vec3 fuse_directions(std::span<const SpatialLine> lines);

/// Interior (hole-edge) lines, 4 horizontal followed by 4 vertical.
std::vector<SpatialLine> filter_board_edges(std::span<const SpatialLine> labeled, const CloudThresholds& th);

struct CornerGrid3D {
  std::array<Vec3, 16> corners;
  Plane plane;
};

CornerGrid3D intersect_corners(const Plane& plane, const Vec3& v_hor, const Vec3& v_ver,
                               std::span<const SpatialLine> interior);

struct CloudExtraction {
  VoxelGrid grid;
  MarginPointSet margins;
  MarginPointSet filtered;
  std::vector<Plane> planes;
  std::vector<std::size_t> board_planes;
  std::vector<std::vector<SpatialLine>> lines;  // per board, all fitted lines (labeled)
  std::vector<CornerGrid3D> grids;              // per board, left to right
};

/// Full point-cloud branch for `boards` targets.
CloudExtraction extract_cloud_corners(std::span<const Vec3> cloud, const CloudThresholds& th, double fov_deg,
                                      int boards = 1, std::uint64_t seed = 0,
                                      const RansacOptions& plane_opts = default_plane_ransac(),
                                      const RansacOptions& line_opts = default_line_ransac());

}  // namespace sscalib
