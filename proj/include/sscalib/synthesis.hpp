#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "sscalib/geometry.hpp"
#include "sscalib/image.hpp"
#include "sscalib/point_cloud.hpp"

namespace sscalib {

/// Four-hole target. Board frame: x right, y up, z out of the front face;
/// origin at the board center.
struct BoardSpec {
  double width = 1.2;
  double height = 1.2;
  double hole_edge = 0.2;
  // Row-major from the top-left hole as seen from the front.
  std::array<Vec3, 4> hole_centers = {Vec3(-0.3, 0.3, 0), Vec3(0.3, 0.3, 0), Vec3(-0.3, -0.3, 0),
                                      Vec3(0.3, -0.3, 0)};
  Pose3d pose_world;  // board frame -> LiDAR frame

  void validate() const;

  /// 16 hole corners in the board frame: hole-major, each hole UL, UR, LR, LL.
  std::array<Vec3, 16> corners_board() const;
  std::array<Vec3, 16> corners_world() const;
  std::array<Vec3, 4> outline_world() const;

  bool inside_outline(double x, double y) const;
  int hole_at(double x, double y) const;  // -1 when on solid board or outside
  Vec3 normal_world() const { return pose_world.rotation().col(2); }
};

/// Board pose for a target `distance` meters ahead of the LiDAR, facing it.
/// yaw turns the board about the LiDAR z axis, pitch tilts it about its own
/// horizontal axis and roll spins it about its normal (degrees).
Pose3d facing_board_pose(double distance, double lateral = 0.0, double height = 0.0, double yaw_deg = 0.0,
                         double pitch_deg = 0.0, double roll_deg = 0.0);

struct SceneSpec {
  std::vector<BoardSpec> boards = {BoardSpec{}};
  // Gap between the rearmost board and the wall behind it.
  double board_clearance = 1.5;
  double lidar_fov = 70.4;
  int duration_equivalent = 200000;

  void validate() const;
  /// Wall parallel to the first board, normal pointing towards the sensor.
  Plane wall() const;
  std::vector<Vec3> corners_world() const;
};

struct NoiseSpec {
  double range_sigma = 0.0;
  double vacant_fraction = 0.0;
  double pixel_sigma = 0.0;

  void validate() const;
};

struct ScanDirection {
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;

  Vec3 unit_vector() const;
};

/// Center-dense, non-repeating rosette: petals leave the FoV center, reach the
/// cone boundary and return, successive petals rotated by the golden angle.
std::vector<ScanDirection> sample_rosette(double fov_deg, int n);

struct SyntheticScan {
  PointCloud cloud;                  // labels always populated
  std::vector<std::int8_t> board;    // index of the board hit, -1 otherwise
  std::vector<std::uint8_t> through_hole;  // background seen through a hole
};

SyntheticScan render_scan(const SceneSpec& scene, const NoiseSpec& noise, std::uint64_t seed);

struct SyntheticImage {
  Image image;
  std::vector<Pixel> corners;        // possibly jittered, what the image shows
  std::vector<Pixel> corners_exact;  // project(T * corner) without jitter
};

inline constexpr std::uint8_t kBoardIntensity = 210;
inline constexpr std::uint8_t kBackgroundIntensity = 30;

/// `cam_pose` maps LiDAR-frame points into the camera frame. The image is
/// rendered with the lens distortion in `k`; corners are ideal pixels.
SyntheticImage render_image(const SceneSpec& scene, const Intrinsics& k, const Pose3d& cam_pose,
                            const NoiseSpec& noise, std::uint64_t seed);

/// Axis permutation LiDAR (x fwd, y left, z up) to camera (x right, y down,
/// z fwd) with coincident origins.
Pose3d nominal_extrinsic();

/// LiDAR (x fwd, y left, z up) to camera (x right, y down, z fwd) with a
/// small rotational offset and a few centimeters of lever arm.
Pose3d default_extrinsic();

}  // namespace sscalib
