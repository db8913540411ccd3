#include "sscalib/evaluation.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>

namespace sscalib {

namespace {

AxisStats axis_stats(std::vector<double> r) {
  AxisStats s;
  double sum = 0.0, sq = 0.0;
  for (double x : r) {
    sum += x;
    sq += x * x;
  }
  const double n = static_cast<double>(r.size());
  s.mean = sum / n;
  s.rms = std::sqrt(sq / n);
  s.p25 = percentile(r, 25.0);
  s.p50 = percentile(r, 50.0);
  s.p75 = percentile(r, 75.0);
  s.residuals = std::move(r);
  return s;
}

void check_corr(const CorrespondenceSet& corr) {
  if (corr.points.empty()) throw Error(ErrorCode::kEmptySet, "no correspondences");
  if (corr.points.size() != corr.pixels.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(corr.points.size()) + " points vs " +
                                                std::to_string(corr.pixels.size()) + " pixels");
  }
}

double luminance(const Rgb& c) { return (double(c[0]) + double(c[1]) + double(c[2])) / 3.0; }

struct CellKey {
  std::int64_t x, y;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    return std::hash<std::int64_t>()(k.x * 73856093LL ^ k.y * 19349663LL);
  }
};

// Range colormap: hue sweeps red -> yellow -> green -> cyan -> blue.
Rgb range_color(double t) {
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int seg = std::min(static_cast<int>(t), 3);
  const double f = t - seg;
  auto c = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * v)); };
  switch (seg) {
    case 0: return {255, c(f), 0};
    case 1: return {c(1.0 - f), 255, 0};
    case 2: return {0, 255, c(f)};
    default: return {0, c(1.0 - f), 255};
  }
}

}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::kEmptySet, "percentile of an empty list");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ReprojectionStats reprojection_stats(const Pose3d& pose, const CorrespondenceSet& corr, const Intrinsics& k) {
  check_corr(corr);
  std::vector<double> u, v;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Pixel r = residual(pose, corr.points[i], corr.pixels[i], k);
    u.push_back(r.x());
    v.push_back(r.y());
    sum += r.norm();
    sq += r.squaredNorm();
  }
  ReprojectionStats s;
  const double n = static_cast<double>(corr.size());
  s.mean = sum / n;
  s.rms = std::sqrt(sq / n);
  s.u = axis_stats(std::move(u));
  s.v = axis_stats(std::move(v));
  return s;
}

std::vector<double> normalized_reprojection(const Pose3d& pose, const CorrespondenceSet& corr, const Intrinsics& k) {
  check_corr(corr);
  if (corr.size() < 2) throw Error(ErrorCode::kEmptySet, "need at least two corners");
  std::vector<Pixel> proj;
  for (const Vec3& p : corr.points) proj.push_back(project(pose * p, k));
  std::vector<double> out(corr.size());
  for (std::size_t g = 0; g < corr.size(); g += 4) {
    const std::size_t end = std::min(g + 4, corr.size());
    const std::size_t m = end - g;
    double spacing = 0.0;
    if (m == 1) {
      // A trailing lone corner borrows the previous hole's scale.
      spacing = (proj[g] - proj[g - 1]).norm();
    } else if (m == 2) {
      spacing = (proj[g + 1] - proj[g]).norm();
    } else {
      for (std::size_t i = 0; i < m; ++i) spacing += (proj[g + (i + 1) % m] - proj[g + i]).norm();
      spacing /= static_cast<double>(m);
    }
    if (!(spacing > 0.0)) throw Error(ErrorCode::kDegenerateInput, "hole projects to a single pixel");
    for (std::size_t i = g; i < end; ++i) out[i] = 100.0 * (corr.pixels[i] - proj[i]).norm() / spacing;
  }
  return out;
}

double board_drift(std::span<const Pixel> original, std::span<const Pixel> overlaid) {
  if (original.size() != overlaid.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(original.size()) + " original vs " +
                                                std::to_string(overlaid.size()) + " overlaid corners");
  }
  if (original.empty()) throw Error(ErrorCode::kEmptySet, "no corners");
  double sum = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) sum += (original[i] - overlaid[i]).norm();
  return sum / static_cast<double>(original.size());
}

std::vector<Vec3> sample_polygon_edges(std::span<const Vec3> polygon, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::kInvalidArgument, "edge sampling step must be positive");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec3& a = polygon[i];
    const Vec3& b = polygon[(i + 1) % polygon.size()];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step)));
    for (int j = 0; j < n; ++j) out.push_back(a + (b - a) * (double(j) / n));
  }
  return out;
}

double uncolored_distance(std::span<const Vec3> board_edges_true, const PointCloud& colored,
                          const UncoloredOptions& opts) {
  if (board_edges_true.empty()) throw Error(ErrorCode::kEmptySet, "no edge samples");
  if (!(opts.plane_band > 0.0)) throw Error(ErrorCode::kInvalidArgument, "plane_band must be positive");

  Vec3 c = Vec3::Zero();
  for (const Vec3& e : board_edges_true) c += e;
  c /= static_cast<double>(board_edges_true.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& e : board_edges_true) cov += (e - c) * (e - c).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (!(es.eigenvalues()(1) > 1e-12 * std::max(1.0, es.eigenvalues()(2)))) {
    throw Error(ErrorCode::kDegenerateInput, "edge samples do not span a plane");
  }
  const Vec3 n = es.eigenvectors().col(0);
  const Vec3 bu = es.eigenvectors().col(2);
  const Vec3 bv = n.cross(bu);
  auto to_plane = [&](const Vec3& p) {
    const Vec3 q = p - c;
    return Eigen::Vector2d(q.dot(bu), q.dot(bv));
  };

  // Board-plane points that the colorization painted with board color.
  const double cell = std::max(opts.plane_band, 1e-3);
  auto key = [cell](const Eigen::Vector2d& p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                   static_cast<std::int64_t>(std::floor(p.y() / cell))};
  };
  std::unordered_map<CellKey, std::vector<Eigen::Vector2d>, CellHash> grid;
  std::int64_t kmin_x = 0, kmax_x = 0, kmin_y = 0, kmax_y = 0;
  bool any = false;
  if (colored.has_colors()) {
    for (std::size_t i = 0; i < colored.size(); ++i) {
      if (!colored.colored.empty() && !colored.colored[i]) continue;
      if (std::abs(n.dot(colored.points[i] - c)) > opts.plane_band) continue;
      if (luminance(colored.colors[i]) < opts.board_min_brightness) continue;
      const Eigen::Vector2d uv = to_plane(colored.points[i]);
      const CellKey k = key(uv);
      grid[k].push_back(uv);
      kmin_x = any ? std::min(kmin_x, k.x) : k.x;
      kmax_x = any ? std::max(kmax_x, k.x) : k.x;
      kmin_y = any ? std::min(kmin_y, k.y) : k.y;
      kmax_y = any ? std::max(kmax_y, k.y) : k.y;
      any = true;
    }
  }
  if (!any) throw Error(ErrorCode::kNoColoredPoints, "no board-plane point carries board color");

  const std::int64_t max_ring = std::max({kmax_x - kmin_x, kmax_y - kmin_y, std::int64_t{1}}) + 2;
  double worst = 0.0;
  for (const Vec3& e : board_edges_true) {
    const Eigen::Vector2d q = to_plane(e);
    const CellKey k0 = key(q);
    double best = std::numeric_limits<double>::infinity();
    // Rings of cells around the sample; anything beyond ring r is at least
    // r * cell away.
    for (std::int64_t r = 0; r <= max_ring; ++r) {
      if (best <= static_cast<double>(r - 1) * cell) break;
      for (std::int64_t dx = -r; dx <= r; ++dx) {
        for (std::int64_t dy = -r; dy <= r; ++dy) {
          if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
          auto it = grid.find(CellKey{k0.x + dx, k0.y + dy});
          if (it == grid.end()) continue;
          for (const auto& p : it->second) best = std::min(best, (p - q).norm());
        }
      }
    }
    worst = std::max(worst, best);
  }
  return worst;
}

PointCloud colorize(const PointCloud& cloud, const Image& image, const Pose3d& pose, const Intrinsics& k) {
  PointCloud out = cloud;
  out.colors.assign(cloud.size(), Rgb{0, 0, 0});
  out.colored.assign(cloud.size(), 0);
  if (image.empty()) return out;
  const Image rgb = image.to_rgb();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 pc = pose * cloud.points[i];
    if (!(pc.z() > kMinDepth)) continue;
    const Pixel px = distort_pixel(project(pc, k), k);
    if (!(px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= rgb.width - 1 && px.y() <= rgb.height - 1)) continue;
    for (int ch = 0; ch < 3; ++ch) {
      out.colors[i][ch] = static_cast<std::uint8_t>(std::lround(std::clamp(rgb.sample(px.x(), px.y(), ch), 0.0, 255.0)));
    }
    out.colored[i] = 1;
  }
  return out;
}

Image project_overlay(const PointCloud& cloud, const Image& image, const Pose3d& pose, const Intrinsics& k) {
  Image out = image.to_rgb();
  struct Hit {
    int x, y;
    double range;
  };
  std::vector<Hit> hits;
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
  for (const Vec3& p : cloud.points) {
    const Vec3 pc = pose * p;
    if (!(pc.z() > kMinDepth)) continue;
    const Pixel px = distort_pixel(project(pc, k), k);
    const int x = static_cast<int>(std::lround(px.x()));
    const int y = static_cast<int>(std::lround(px.y()));
    if (!out.contains(x, y)) continue;
    const double r = p.norm();
    hits.push_back({x, y, r});
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
  }
  const double span = rmax > rmin ? rmax - rmin : 1.0;
  for (const Hit& h : hits) {
    const Rgb col = range_color((h.range - rmin) / span);
    for (int ch = 0; ch < 3; ++ch) out.at(h.x, h.y, ch) = col[ch];
  }
  return out;
}

}  // namespace sscalib
