#include "sscalib/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace sscalib {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kPointsPerPetal = 1000;
constexpr double kPetalWidth = std::numbers::pi / 6.0;
const double kGoldenAngle = std::numbers::pi * (3.0 - std::sqrt(5.0));

struct Hit {
  double range = std::numeric_limits<double>::infinity();
  int board = -1;
  bool through_hole = false;
};

double ray_plane(const Vec3& origin, const Vec3& dir, const Vec3& normal, double offset) {
  const double denom = normal.dot(dir);
  if (std::abs(denom) < 1e-12) return -1.0;
  return -(normal.dot(origin) + offset) / denom;
}

// Nearest surface along a unit ray from the LiDAR origin.
Hit cast_ray(const SceneSpec& scene, const Plane& wall, const Vec3& dir) {
  Hit hit;
  bool saw_hole = false;
  for (std::size_t b = 0; b < scene.boards.size(); ++b) {
    const BoardSpec& board = scene.boards[b];
    const Vec3 n = board.normal_world();
    const double t = ray_plane(Vec3::Zero(), dir, n, -n.dot(board.pose_world.translation()));
    if (!(t > 0.0) || t >= hit.range) continue;
    const Vec3 local = board.pose_world.inverse() * (t * dir);
    if (!board.inside_outline(local.x(), local.y())) continue;
    if (board.hole_at(local.x(), local.y()) >= 0) {
      saw_hole = true;
      continue;
    }
    hit.range = t;
    hit.board = static_cast<int>(b);
  }
  if (hit.board >= 0) return hit;
  const double t = ray_plane(Vec3::Zero(), dir, wall.normal, wall.offset);
  if (t > 0.0) {
    hit.range = t;
    hit.through_hole = saw_hole;
  }
  return hit;
}

}  // namespace

void BoardSpec::validate() const {
  if (!(width > 0 && height > 0 && hole_edge > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "board dimensions must be positive");
  }
  for (const Vec3& c : hole_centers) {
    if (std::abs(c.x()) + 0.5 * hole_edge >= 0.5 * width || std::abs(c.y()) + 0.5 * hole_edge >= 0.5 * height) {
      throw Error(ErrorCode::kInvalidArgument, "hole does not lie strictly inside the board");
    }
  }
}

std::array<Vec3, 16> BoardSpec::corners_board() const {
  std::array<Vec3, 16> out;
  const double h = 0.5 * hole_edge;
  for (int i = 0; i < 4; ++i) {
    const Vec3& c = hole_centers[i];
    out[4 * i + 0] = Vec3(c.x() - h, c.y() + h, 0.0);
    out[4 * i + 1] = Vec3(c.x() + h, c.y() + h, 0.0);
    out[4 * i + 2] = Vec3(c.x() + h, c.y() - h, 0.0);
    out[4 * i + 3] = Vec3(c.x() - h, c.y() - h, 0.0);
  }
  return out;
}

std::array<Vec3, 16> BoardSpec::corners_world() const {
  std::array<Vec3, 16> out = corners_board();
  for (Vec3& p : out) p = pose_world * p;
  return out;
}

std::array<Vec3, 4> BoardSpec::outline_world() const {
  const double w = 0.5 * width, h = 0.5 * height;
  return {pose_world * Vec3(-w, h, 0), pose_world * Vec3(w, h, 0), pose_world * Vec3(w, -h, 0),
          pose_world * Vec3(-w, -h, 0)};
}

bool BoardSpec::inside_outline(double x, double y) const {
  return std::abs(x) <= 0.5 * width && std::abs(y) <= 0.5 * height;
}

int BoardSpec::hole_at(double x, double y) const {
  const double h = 0.5 * hole_edge;
  for (int i = 0; i < 4; ++i) {
    if (std::abs(x - hole_centers[i].x()) < h && std::abs(y - hole_centers[i].y()) < h) return i;
  }
  return -1;
}

Pose3d facing_board_pose(double distance, double lateral, double height, double yaw_deg, double pitch_deg,
                         double roll_deg) {
  Matrix3<double> base;
  base.col(0) = -Vec3::UnitY();
  base.col(1) = Vec3::UnitZ();
  base.col(2) = -Vec3::UnitX();
  const Matrix3<double> yaw = so3_exp(Vec3(0, 0, yaw_deg * kDeg));
  const Matrix3<double> pitch = so3_exp(Vec3(pitch_deg * kDeg, 0, 0));
  const Matrix3<double> roll = so3_exp(Vec3(0, 0, roll_deg * kDeg));
  return Pose3d(yaw * base * pitch * roll, Vec3(distance, lateral, height));
}

void SceneSpec::validate() const {
  if (boards.empty()) throw Error(ErrorCode::kEmptyScene, "scene has no boards");
  for (const BoardSpec& b : boards) b.validate();
  if (!(board_clearance > 0)) throw Error(ErrorCode::kInvalidArgument, "board_clearance must be positive");
  if (!(lidar_fov > 0 && lidar_fov < 180)) throw Error(ErrorCode::kInvalidArgument, "lidar_fov must be in (0, 180)");
  if (duration_equivalent <= 0) throw Error(ErrorCode::kInvalidArgument, "duration_equivalent must be positive");
}

Plane SceneSpec::wall() const {
  const Vec3 n = boards.front().normal_world();
  double nearest = std::numeric_limits<double>::infinity();
  for (const BoardSpec& b : boards) {
    for (const Vec3& p : b.outline_world()) nearest = std::min(nearest, n.dot(p));
  }
  Plane wall;
  wall.normal = n;
  wall.offset = -(nearest - board_clearance);
  return wall;
}

std::vector<Vec3> SceneSpec::corners_world() const {
  std::vector<Vec3> out;
  for (const BoardSpec& b : boards) {
    const auto c = b.corners_world();
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

void NoiseSpec::validate() const {
  if (!(range_sigma >= 0 && pixel_sigma >= 0 && vacant_fraction >= 0 && vacant_fraction <= 1)) {
    throw Error(ErrorCode::kInvalidArgument, "noise parameters must be non-negative (vacant_fraction <= 1)");
  }
}

Vec3 ScanDirection::unit_vector() const {
  const double el = elevation_deg * kDeg, az = azimuth_deg * kDeg;
  return Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
}

std::vector<ScanDirection> sample_rosette(double fov_deg, int n) {
  if (n <= 0) throw Error(ErrorCode::kInvalidArgument, "rosette needs n > 0");
  const double half = 0.5 * fov_deg;
  std::vector<ScanDirection> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int petal = i / kPointsPerPetal;
    const double u = static_cast<double>(i % kPointsPerPetal) / kPointsPerPetal;
    // Triangle wave in radius: uniform in r along each petal, so the areal
    // density falls off like 1/r away from the center.
    const double r = half * (1.0 - std::abs(2.0 * u - 1.0));
    const double theta = petal * kGoldenAngle + (u - 0.5) * kPetalWidth;
    out[i] = {r * std::sin(theta), r * std::cos(theta)};
  }
  return out;
}

SyntheticScan render_scan(const SceneSpec& scene, const NoiseSpec& noise, std::uint64_t seed) {
  scene.validate();
  noise.validate();
  const Plane wall = scene.wall();
  const auto dirs = sample_rosette(scene.lidar_fov, scene.duration_equivalent);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  SyntheticScan scan;
  auto& cloud = scan.cloud;
  cloud.points.reserve(dirs.size());
  cloud.labels.reserve(dirs.size());

  auto on_surface = [&](const Vec3& p) {
    const double tol = 3.0 * noise.range_sigma;
    if (std::abs(wall.signed_distance(p)) <= tol) return true;
    for (const BoardSpec& b : scene.boards) {
      const Vec3 n = b.normal_world();
      if (std::abs(n.dot(p - b.pose_world.translation())) <= tol) return true;
    }
    return false;
  };

  Vec3 prev_dir = Vec3::Zero();
  Hit prev;
  for (const ScanDirection& sd : dirs) {
    const Vec3 d = sd.unit_vector();
    const Hit hit = cast_ray(scene, wall, d);
    if (std::isfinite(hit.range) && std::isfinite(prev.range) && (hit.board >= 0) != (prev.board >= 0) &&
        noise.vacant_fraction > 0.0) {
      // Draw both numbers unconditionally so the stream does not depend on
      // the outcome of the test.
      const double coin = uniform(rng);
      const double f = 0.2 + 0.6 * uniform(rng);
      if (coin < noise.vacant_fraction) {
        const Vec3 dv = ((1.0 - f) * prev_dir + f * d).normalized();
        const Vec3 p = dv * ((1.0 - f) * prev.range + f * hit.range);
        if (!on_surface(p)) {
          cloud.points.push_back(p);
          cloud.labels.push_back(static_cast<std::uint8_t>(PointLabel::kVacant));
          scan.board.push_back(-1);
          scan.through_hole.push_back(0);
        }
      }
    }
    if (std::isfinite(hit.range)) {
      const double range = hit.range + (noise.range_sigma > 0 ? noise.range_sigma * gauss(rng) : 0.0);
      cloud.points.push_back(d * range);
      cloud.labels.push_back(static_cast<std::uint8_t>(hit.board >= 0 ? PointLabel::kBoard : PointLabel::kBackground));
      scan.board.push_back(static_cast<std::int8_t>(hit.board));
      scan.through_hole.push_back(hit.through_hole ? 1 : 0);
    }
    prev = hit;
    prev_dir = d;
  }
  if (cloud.empty()) throw Error(ErrorCode::kEmptyScene, "no ray hit the scene");
  return scan;
}

namespace {

bool inside_convex(const std::array<Pixel, 4>& q, const Pixel& p) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Pixel a = q[i], b = q[(i + 1) % 4];
    const double c = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    const int s = c > 0 ? 1 : (c < 0 ? -1 : 0);
    if (s == 0) continue;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return true;
}

struct ProjectedBoard {
  double depth;
  std::array<Pixel, 4> outline;
  std::array<std::array<Pixel, 4>, 4> holes;
};

}  // namespace

SyntheticImage render_image(const SceneSpec& scene, const Intrinsics& k, const Pose3d& cam_pose,
                            const NoiseSpec& noise, std::uint64_t seed) {
  scene.validate();
  noise.validate();
  if (!k.valid()) throw Error(ErrorCode::kInvalidArgument, "invalid intrinsics");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticImage out;
  std::vector<ProjectedBoard> boards;
  auto to_pixel = [&](const Vec3& world) {
    const Vec3 pc = cam_pose * world;
    if (!(pc.z() > kMinDepth)) throw Error(ErrorCode::kBoardOutOfView, "board behind the camera");
    return project(pc, k);
  };
  for (const BoardSpec& b : scene.boards) {
    ProjectedBoard pb;
    pb.depth = (cam_pose * b.pose_world.translation()).z();
    const auto outline = b.outline_world();
    for (int i = 0; i < 4; ++i) pb.outline[i] = to_pixel(outline[i]);
    const auto corners = b.corners_world();
    for (int i = 0; i < 16; ++i) {
      const Pixel exact = to_pixel(corners[i]);
      if (!(exact.x() >= 0 && exact.y() >= 0 && exact.x() <= k.width - 1 && exact.y() <= k.height - 1)) {
        throw Error(ErrorCode::kBoardOutOfView, "hole corner projects outside the image");
      }
      Pixel shown = exact;
      if (noise.pixel_sigma > 0) {
        shown.x() += noise.pixel_sigma * gauss(rng);
        shown.y() += noise.pixel_sigma * gauss(rng);
      }
      out.corners_exact.push_back(exact);
      out.corners.push_back(shown);
      pb.holes[i / 4][i % 4] = shown;
    }
    boards.push_back(pb);
  }
  std::stable_sort(boards.begin(), boards.end(),
                   [](const ProjectedBoard& a, const ProjectedBoard& b) { return a.depth < b.depth; });

  auto bright_at = [&](const Pixel& ideal) {
    for (const ProjectedBoard& b : boards) {
      if (!inside_convex(b.outline, ideal)) continue;
      bool in_hole = false;
      for (const auto& h : b.holes) in_hole = in_hole || inside_convex(h, ideal);
      if (!in_hole) return true;
    }
    return false;
  };

  constexpr int kSub = 4;
  out.image = Image(k.width, k.height, 1);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      int covered = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const Pixel raw(x - 0.5 + (sx + 0.5) / kSub, y - 0.5 + (sy + 0.5) / kSub);
          if (bright_at(undistort_pixel(raw, k))) ++covered;
        }
      }
      const double v = kBackgroundIntensity + (kBoardIntensity - kBackgroundIntensity) * covered / double(kSub * kSub);
      out.image.at(x, y) = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

Pose3d nominal_extrinsic() {
  Matrix3<double> base;
  base << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  return Pose3d(base, Vec3::Zero());
}

Pose3d default_extrinsic() {
  const Matrix3<double> tweak = so3_exp(Vec3(0.6, -0.8, 0.5) * kDeg);
  return Pose3d(tweak * nominal_extrinsic().rotation(), Vec3(0.06, -0.08, 0.05));
}

}  // namespace sscalib
