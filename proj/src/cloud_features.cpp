#include "sscalib/cloud_features.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "sscalib/planar.hpp"

namespace sscalib {

namespace {

constexpr double kRad2Deg = 180.0 / std::numbers::pi;

[[noreturn]] void bad_threshold(const char* field, const std::string& why) {
  throw Error(ErrorCode::kInvalidThreshold, std::string(field) + " " + why);
}

struct Mode {
  double center = 0.0;
  std::vector<std::size_t> members;
};

// Flat-kernel mean shift on scalars; modes sorted by center.
std::vector<Mode> range_modes(std::span<const double> values, double bandwidth) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> sorted(n), prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sorted[i] = values[order[i]];
    prefix[i + 1] = prefix[i] + sorted[i];
  }
  std::vector<double> converged(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = sorted[i];
    for (int iter = 0; iter < 100; ++iter) {
      const auto lo = std::lower_bound(sorted.begin(), sorted.end(), m - bandwidth) - sorted.begin();
      const auto hi = std::upper_bound(sorted.begin(), sorted.end(), m + bandwidth) - sorted.begin();
      const double next = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
      const bool done = std::abs(next - m) < 1e-9 * std::max(1.0, bandwidth);
      m = next;
      if (done) break;
    }
    converged[i] = m;
  }
  // Sorted starts converge to sorted modes, so neighbouring entries suffice.
  std::vector<std::size_t> by_mode(n);
  std::iota(by_mode.begin(), by_mode.end(), 0);
  std::stable_sort(by_mode.begin(), by_mode.end(),
                   [&](std::size_t a, std::size_t b) { return converged[a] < converged[b]; });
  std::vector<Mode> modes;
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = by_mode[k];
    if (modes.empty() || converged[i] - converged[by_mode[k - 1]] >= 0.5 * bandwidth) {
      if (!modes.empty()) modes.back().center = sum / modes.back().members.size();
      modes.emplace_back();
      sum = 0.0;
    }
    modes.back().members.push_back(order[i]);
    sum += converged[i];
  }
  if (!modes.empty()) modes.back().center = sum / modes.back().members.size();
  for (Mode& m : modes) std::sort(m.members.begin(), m.members.end());
  return modes;
}

std::vector<double> ranges_of(std::span<const Vec3> points) {
  std::vector<double> r(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) r[i] = points[i].norm();
  return r;
}

std::uint64_t draw_index(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

struct PcaFit {
  Vec3 centroid = Vec3::Zero();
  Matrix3<double> axes;  // columns by ascending eigenvalue
  Vec3 eigenvalues = Vec3::Zero();
};

template <typename Points>
PcaFit pca(const Points& points) {
  PcaFit fit;
  for (const Vec3& p : points) fit.centroid += p;
  fit.centroid /= static_cast<double>(points.size());
  Matrix3<double> cov = Matrix3<double>::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - fit.centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix3<double>> eig(cov / static_cast<double>(points.size()));
  fit.axes = eig.eigenvectors();
  fit.eigenvalues = eig.eigenvalues();
  return fit;
}

// Unit vector orthogonal to n.
Vec3 any_perpendicular(const Vec3& n) {
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(helper).normalized();
}

double line_separation(const SpatialLine& a, const SpatialLine& b, const Vec3& dir) {
  const Vec3 d = b.anchor - a.anchor;
  return (d - d.dot(dir) * dir).norm();
}

// Nearest mode passing the population gate. A mode smaller than
// mode_min_points (and not the densest) also needs `corroborated` to accept
// its center range.
std::vector<std::size_t> frontier_members(std::span<const Vec3> points, const CloudThresholds& th,
                                          const std::function<bool(double)>& corroborated) {
  if (points.empty()) return {};
  const std::vector<double> r = ranges_of(points);
  std::vector<Mode> modes = range_modes(r, 2.0 * th.deflation_sigma);
  std::size_t densest = 0;
  for (const Mode& m : modes) densest = std::max(densest, m.members.size());
  const std::size_t min_points = std::min(densest, static_cast<std::size_t>(th.mode_min_points));
  for (Mode& m : modes) {
    if (static_cast<double>(m.members.size()) < th.mode_population_gate * static_cast<double>(densest)) continue;
    if (m.members.size() < min_points && !(corroborated && corroborated(m.center))) continue;
    return std::move(m.members);
  }
  return {};
}

}  // namespace

void CloudThresholds::validate() const {
  auto positive = [](const char* field, double v) {
    if (!(v > 0) || !std::isfinite(v)) bad_threshold(field, "must be positive, got " + std::to_string(v));
  };
  positive("margin_step_deg", margin_step_deg);
  positive("range_threshold", range_threshold);
  positive("plane_threshold", plane_threshold);
  positive("line_threshold", line_threshold);
  positive("sparseness_radius", sparseness_radius);
  positive("sparseness_min_count", sparseness_min_count);
  positive("board_length", board_length);
  positive("hole_edge", hole_edge);
  positive("deflation_sigma", deflation_sigma);
  positive("deflation_multiplier", deflation_multiplier);
  if (!(mode_population_gate > 0 && mode_population_gate <= 1)) {
    bad_threshold("mode_population_gate", "must lie in (0, 1]");
  }
  positive("mode_min_points", mode_min_points);
  if (!(range_threshold > plane_threshold)) bad_threshold("range_threshold", "must exceed plane_threshold");
  if (!(hole_edge < board_length)) bad_threshold("hole_edge", "must be smaller than board_length");
}

double elevation_deg(const Vec3& p) { return std::atan2(p.z(), std::hypot(p.x(), p.y())) * kRad2Deg; }
double azimuth_deg(const Vec3& p) { return std::atan2(p.y(), p.x()) * kRad2Deg; }

VoxelGrid voxelize(std::span<const Vec3> cloud, const CloudThresholds& th, double fov_deg) {
  if (cloud.empty()) throw Error(ErrorCode::kEmptyCloud, "cannot voxelize an empty cloud");
  VoxelGrid grid;
  grid.step_deg = th.margin_step_deg;
  grid.fov_deg = fov_deg;
  grid.bins = static_cast<int>(std::ceil(fov_deg / th.margin_step_deg - 1e-9));
  const double half = 0.5 * fov_deg;
  auto bin_of = [&](double angle) {
    return std::min(static_cast<int>(std::floor((angle + half) / th.margin_step_deg)), grid.bins - 1);
  };

  std::vector<std::pair<std::int64_t, std::uint32_t>> keyed;
  keyed.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud[i];
    if (!p.allFinite() || p.squaredNorm() == 0.0) continue;
    const double el = elevation_deg(p), az = azimuth_deg(p);
    if (std::abs(el) > half || std::abs(az) > half) continue;
    keyed.emplace_back(static_cast<std::int64_t>(bin_of(el)) * grid.bins + bin_of(az), static_cast<std::uint32_t>(i));
  }
  std::sort(keyed.begin(), keyed.end());
  for (std::size_t k = 0; k < keyed.size(); ++k) {
    if (k == 0 || keyed[k].first != keyed[k - 1].first) {
      Voxel v;
      v.elevation_bin = static_cast<int>(keyed[k].first / grid.bins);
      v.azimuth_bin = static_cast<int>(keyed[k].first % grid.bins);
      grid.cells.push_back(std::move(v));
    }
    grid.cells.back().points.push_back(cloud[keyed[k].second]);
    grid.cells.back().source.push_back(keyed[k].second);
  }
  return grid;
}

std::vector<std::size_t> meanshift_frontier(std::span<const Vec3> points, const CloudThresholds& th) {
  return frontier_members(points, th, {});
}

std::vector<std::size_t> deflate(std::span<const Vec3> frontier, const CloudThresholds& th) {
  if (frontier.empty()) return {};
  const std::vector<double> r = ranges_of(frontier);
  const std::vector<Mode> modes = range_modes(r, 2.0 * th.deflation_sigma);
  const Mode* best = &modes.front();
  for (const Mode& m : modes) {
    if (m.members.size() > best->members.size()) best = &m;
  }
  const double bound = th.deflation_multiplier * th.deflation_sigma;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (std::abs(r[i] - best->center) <= bound) keep.push_back(i);
  }
  return keep;
}

MarginPointSet extract_margins(const VoxelGrid& grid, const CloudThresholds& th) {
  MarginPointSet out;
  std::vector<Vec3> frontier;
  std::vector<std::int32_t> cell_at(static_cast<std::size_t>(grid.bins) * grid.bins, -1);
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    const Voxel& v = grid.cells[c];
    cell_at[static_cast<std::size_t>(v.elevation_bin) * grid.bins + v.azimuth_bin] = static_cast<std::int32_t>(c);
  }
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    const Voxel& v = grid.cells[c];
    if (v.points.size() < 2) continue;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const Vec3& p : v.points) {
      const double r = p.norm();
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    if (hi - lo <= th.range_threshold) continue;
    // A sparse mode counts when a neighbouring voxel sees the same surface.
    auto corroborated = [&](double range) {
      for (int de = -1; de <= 1; ++de) {
        for (int da = -1; da <= 1; ++da) {
          const int e = v.elevation_bin + de, a = v.azimuth_bin + da;
          if ((de == 0 && da == 0) || e < 0 || a < 0 || e >= grid.bins || a >= grid.bins) continue;
          const std::int32_t n = cell_at[static_cast<std::size_t>(e) * grid.bins + a];
          if (n < 0) continue;
          for (const Vec3& p : grid.cells[n].points) {
            if (std::abs(p.norm() - range) <= th.plane_threshold) return true;
          }
        }
      }
      return false;
    };
    const auto members = frontier_members(v.points, th, corroborated);
    frontier.clear();
    for (std::size_t i : members) frontier.push_back(v.points[i]);
    for (std::size_t k : deflate(frontier, th)) {
      const std::size_t i = members[k];
      out.points.push_back(v.points[i]);
      out.voxel.push_back(static_cast<std::uint32_t>(c));
      out.source.push_back(v.source[i]);
    }
  }
  return out;
}

MarginPointSet sparseness_filter(const MarginPointSet& margins, const CloudThresholds& th) {
  const double r = th.sparseness_radius;
  const double r2 = r * r;
  auto key_of = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    return (x * 73856093) ^ (y * 19349663) ^ (z * 83492791);
  };
  auto cell_of = [&](const Vec3& p) {
    return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(p.x() / r)),
                                       static_cast<std::int64_t>(std::floor(p.y() / r)),
                                       static_cast<std::int64_t>(std::floor(p.z() / r))};
  };
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> buckets;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const auto c = cell_of(margins.points[i]);
    buckets[key_of(c[0], c[1], c[2])].push_back(static_cast<std::uint32_t>(i));
  }
  MarginPointSet out;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const Vec3& p = margins.points[i];
    const auto c = cell_of(p);
    int count = 0;
    for (int dx = -1; dx <= 1 && count < th.sparseness_min_count; ++dx) {
      for (int dy = -1; dy <= 1 && count < th.sparseness_min_count; ++dy) {
        for (int dz = -1; dz <= 1 && count < th.sparseness_min_count; ++dz) {
          const auto it = buckets.find(key_of(c[0] + dx, c[1] + dy, c[2] + dz));
          if (it == buckets.end()) continue;
          for (std::uint32_t j : it->second) {
            if (j != i && (margins.points[j] - p).squaredNorm() <= r2) ++count;
          }
        }
      }
    }
    if (count >= th.sparseness_min_count) {
      out.points.push_back(p);
      out.voxel.push_back(margins.voxel[i]);
      out.source.push_back(margins.source[i]);
    }
  }
  return out;
}

std::vector<Plane> ransac_plane(std::span<const Vec3> points, const CloudThresholds& th, const RansacOptions& opts,
                                std::uint64_t seed) {
  if (points.size() < 3) throw Error(ErrorCode::kDegenerateInput, "plane fitting needs at least 3 points");
  {
    const PcaFit all = pca(points);
    if (all.eigenvalues(1) <= 1e-12 * std::max(all.eigenvalues(2), 1e-300)) {
      throw Error(ErrorCode::kDegenerateInput, "all points are collinear");
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> remaining(points.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<Plane> planes;
  const std::size_t min_support = static_cast<std::size_t>(std::max(opts.min_support, 3));

  while (static_cast<int>(planes.size()) < opts.max_models && remaining.size() >= 2 * min_support) {
    const std::size_t n = remaining.size();
    std::size_t best_count = 0;
    double best_residual = std::numeric_limits<double>::infinity();
    Vec3 best_normal = Vec3::UnitZ();
    double best_offset = 0.0;
    for (int it = 0; it < opts.max_iterations; ++it) {
      const std::size_t a = draw_index(rng, n), b = draw_index(rng, n), c = draw_index(rng, n);
      if (a == b || b == c || a == c) continue;
      const Vec3& pa = points[remaining[a]];
      Vec3 normal = (points[remaining[b]] - pa).cross(points[remaining[c]] - pa);
      const double len = normal.norm();
      if (len < 1e-12) continue;
      normal /= len;
      const double offset = -normal.dot(pa);
      std::size_t count = 0;
      double residual = 0.0;
      for (std::size_t idx : remaining) {
        const double d = std::abs(normal.dot(points[idx]) + offset);
        if (d < th.plane_threshold) {
          ++count;
          residual += d;
        }
      }
      const double mean = count ? residual / count : std::numeric_limits<double>::infinity();
      if (count > best_count || (count == best_count && mean < best_residual)) {
        best_count = count;
        best_residual = mean;
        best_normal = normal;
        best_offset = offset;
      }
    }
    if (best_count < min_support) break;

    std::vector<Vec3> inliers;
    for (std::size_t idx : remaining) {
      if (std::abs(best_normal.dot(points[idx]) + best_offset) < th.plane_threshold) inliers.push_back(points[idx]);
    }
    const PcaFit fit = pca(inliers);
    Plane plane;
    plane.normal = fit.axes.col(0).normalized();
    plane.offset = -plane.normal.dot(fit.centroid);
    if (plane.offset < 0) {
      plane.normal = -plane.normal;
      plane.offset = -plane.offset;
    }
    std::vector<std::size_t> rest;
    for (std::size_t idx : remaining) {
      if (std::abs(plane.signed_distance(points[idx])) < th.plane_threshold) {
        plane.inliers.push_back(points[idx]);
      } else {
        rest.push_back(idx);
      }
    }
    if (plane.inliers.size() < min_support) break;
    remaining = std::move(rest);
    planes.push_back(std::move(plane));
  }
  std::stable_sort(planes.begin(), planes.end(),
                   [](const Plane& a, const Plane& b) { return a.inliers.size() > b.inliers.size(); });
  if (static_cast<int>(planes.size()) < opts.min_models) {
    throw Error(ErrorCode::kInsufficientPoints, "found " + std::to_string(planes.size()) + " planes, need " +
                                                    std::to_string(opts.min_models));
  }
  return planes;
}

std::vector<std::size_t> select_board_planes(std::span<const Plane> planes, const CloudThresholds& th) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const Plane& plane = planes[i];
    if (plane.inliers.size() < 3) continue;
    const Vec3 u = any_perpendicular(plane.normal);
    const Vec3 v = plane.normal.cross(u);
    std::vector<Pixel> flat;
    flat.reserve(plane.inliers.size());
    for (const Vec3& p : plane.inliers) flat.emplace_back(p.dot(u), p.dot(v));
    const RotatedRect rect = min_area_rect(convex_hull(flat));
    const double lo = 0.8 * th.board_length, hi = 1.2 * th.board_length;
    if (rect.width >= lo && rect.width <= hi && rect.height >= lo && rect.height <= hi) out.push_back(i);
  }
  return out;
}

std::vector<SpatialLine> ransac_lines(const Plane& plane, const CloudThresholds& th, const RansacOptions& opts,
                                      std::uint64_t seed) {
  if (plane.inliers.size() < 2) throw Error(ErrorCode::kInsufficientPoints, "line fitting needs at least 2 points");
  std::vector<Vec3> points;
  points.reserve(plane.inliers.size());
  for (const Vec3& p : plane.inliers) points.push_back(plane.project(p));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> remaining(points.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  const std::size_t min_support = static_cast<std::size_t>(std::max(opts.min_support, 2));
  std::vector<SpatialLine> lines;

  while (static_cast<int>(lines.size()) < opts.max_models && remaining.size() >= 2 * min_support) {
    const std::size_t n = remaining.size();
    std::size_t best_count = 0;
    double best_residual = std::numeric_limits<double>::infinity();
    Vec3 best_anchor = Vec3::Zero(), best_dir = Vec3::UnitX();
    for (int it = 0; it < opts.max_iterations; ++it) {
      const std::size_t a = draw_index(rng, n), b = draw_index(rng, n);
      if (a == b) continue;
      const Vec3& pa = points[remaining[a]];
      Vec3 dir = points[remaining[b]] - pa;
      const double len = dir.norm();
      if (len < 1e-9) continue;
      dir /= len;
      std::size_t count = 0;
      double residual = 0.0;
      for (std::size_t idx : remaining) {
        const double d = (points[idx] - pa).cross(dir).norm();
        if (d < th.line_threshold) {
          ++count;
          residual += d;
        }
      }
      const double mean = count ? residual / count : std::numeric_limits<double>::infinity();
      if (count > best_count || (count == best_count && mean < best_residual)) {
        best_count = count;
        best_residual = mean;
        best_anchor = pa;
        best_dir = dir;
      }
    }
    if (best_count < min_support) break;

    std::vector<Vec3> members;
    for (std::size_t idx : remaining) {
      if ((points[idx] - best_anchor).cross(best_dir).norm() < th.line_threshold) members.push_back(points[idx]);
    }
    const PcaFit fit = pca(members);
    SpatialLine line;
    line.anchor = fit.centroid;
    line.direction = fit.axes.col(2).normalized();
    std::vector<std::size_t> rest;
    for (std::size_t idx : remaining) {
      if (line.distance(points[idx]) < th.line_threshold) {
        line.members.push_back(points[idx]);
      } else {
        rest.push_back(idx);
      }
    }
    line.support = static_cast<int>(line.members.size());
    if (line.members.size() < min_support) break;
    remaining = std::move(rest);
    lines.push_back(std::move(line));
  }
  return lines;
}

Vec3 fuse_directions(std::span<const SpatialLine> lines) {
  if (lines.empty()) throw Error(ErrorCode::kInvalidArgument, "no lines to fuse");
  // The dominant axis of the weighted scatter is a sign- and order-free
  // reference for aligning the inputs.
  Matrix3<double> scatter = Matrix3<double>::Zero();
  double total = 0.0;
  for (const SpatialLine& l : lines) {
    scatter += l.support * l.direction * l.direction.transpose();
    total += l.support;
  }
  if (!(total > 0)) throw Error(ErrorCode::kInvalidArgument, "lines carry no support");
  Eigen::SelfAdjointEigenSolver<Matrix3<double>> eig(scatter);
  const Vec3 reference = eig.eigenvectors().col(2);
  Vec3 fused = Vec3::Zero();
  for (const SpatialLine& l : lines) {
    const Vec3 d = l.direction.dot(reference) < 0 ? Vec3(-l.direction) : l.direction;
    fused += d * (l.support / total);
  }
  fused.normalize();
  Eigen::Index k;
  fused.cwiseAbs().maxCoeff(&k);
  if (fused(k) < 0) fused = -fused;
  return fused;
}

FusedLines classify_fuse_lines(std::span<const SpatialLine> lines) {
  if (lines.empty()) throw Error(ErrorCode::kSingleClassOnly, "no lines to classify");
  std::size_t seed = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].support > lines[seed].support) seed = i;
  }
  const double cos45 = std::cos(std::numbers::pi / 4.0);
  std::vector<char> in_a(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    in_a[i] = std::abs(lines[i].direction.dot(lines[seed].direction)) >= cos45;
  }
  auto split = [&](bool want_a) {
    std::vector<SpatialLine> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (static_cast<bool>(in_a[i]) == want_a) out.push_back(lines[i]);
    }
    return out;
  };
  auto fuse_classes = [&](Vec3& a, Vec3& b) {
    const auto la = split(true), lb = split(false);
    if (la.empty() || lb.empty()) {
      throw Error(ErrorCode::kSingleClassOnly, "all " + std::to_string(lines.size()) + " lines share one direction");
    }
    a = fuse_directions(la);
    b = fuse_directions(lb);
  };
  Vec3 axis_a, axis_b;
  fuse_classes(axis_a, axis_b);
  // One relabeling pass against the fused axes.
  for (std::size_t i = 0; i < lines.size(); ++i) {
    in_a[i] = std::abs(lines[i].direction.dot(axis_a)) >= std::abs(lines[i].direction.dot(axis_b));
  }
  fuse_classes(axis_a, axis_b);

  const bool a_horizontal = std::abs(axis_a.z()) <= std::abs(axis_b.z());
  FusedLines out;
  out.horizontal = a_horizontal ? axis_a : axis_b;
  out.vertical = a_horizontal ? axis_b : axis_a;
  out.lines.assign(lines.begin(), lines.end());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out.lines[i].label = (static_cast<bool>(in_a[i]) == a_horizontal) ? LineLabel::kHorizontal : LineLabel::kVertical;
  }
  return out;
}

std::vector<SpatialLine> filter_board_edges(std::span<const SpatialLine> labeled, const CloudThresholds& th) {
  std::vector<SpatialLine> result;
  for (LineLabel label : {LineLabel::kHorizontal, LineLabel::kVertical}) {
    std::vector<SpatialLine> cls;
    for (const SpatialLine& l : labeled) {
      if (l.label == label) cls.push_back(l);
    }
    const char* name = label == LineLabel::kHorizontal ? "horizontal" : "vertical";
    if (cls.empty()) throw Error(ErrorCode::kWrongLineCount, std::string("no ") + name + " lines");
    const Vec3 dir = fuse_directions(cls);

    // (a) both outer edges of the board, one board length apart
    std::vector<char> drop(cls.size(), 0);
    for (std::size_t i = 0; i < cls.size(); ++i) {
      for (std::size_t j = i + 1; j < cls.size(); ++j) {
        if (std::abs(line_separation(cls[i], cls[j], dir) - th.board_length) <= 0.1 * th.board_length) {
          drop[i] = drop[j] = 1;
        }
      }
    }
    std::vector<SpatialLine> kept;
    for (std::size_t i = 0; i < cls.size(); ++i) {
      if (!drop[i]) kept.push_back(cls[i]);
    }

    // (b) near-duplicates: the better-supported line wins
    std::stable_sort(kept.begin(), kept.end(),
                     [](const SpatialLine& a, const SpatialLine& b) { return a.support > b.support; });
    std::vector<SpatialLine> distinct;
    for (const SpatialLine& l : kept) {
      bool duplicate = false;
      for (const SpatialLine& d : distinct) duplicate = duplicate || line_separation(d, l, dir) < 0.8 * th.hole_edge;
      if (!duplicate) distinct.push_back(l);
    }

    // (c) a single surviving outer edge carries the most points
    if (distinct.size() == 5) distinct.erase(distinct.begin());

    if (distinct.size() != 4) {
      throw Error(ErrorCode::kWrongLineCount, std::to_string(distinct.size()) + " " + name +
                                                  " hole-edge lines after filtering, expected 4");
    }
    result.insert(result.end(), distinct.begin(), distinct.end());
  }
  return result;
}

CornerGrid3D intersect_corners(const Plane& plane, const Vec3& v_hor, const Vec3& v_ver,
                               std::span<const SpatialLine> interior) {
  const Vec3& n = plane.normal;
  const Vec3 h = (v_hor - v_hor.dot(n) * n).normalized();
  const Vec3 v = (v_ver - v_ver.dot(n) * n).normalized();
  if (!h.allFinite() || !v.allFinite() || std::abs(h.dot(v)) > std::cos(std::numbers::pi / 6.0)) {
    throw Error(ErrorCode::kNearParallel, "horizontal and vertical directions subtend less than 30 degrees");
  }
  Vec3 up = n.cross(h);
  if (up.z() < 0) up = -up;
  Vec3 left = n.cross(v);
  if (left.y() < 0) left = -left;

  std::vector<Vec3> hor, ver;
  for (const SpatialLine& l : interior) {
    if (l.label == LineLabel::kHorizontal) hor.push_back(plane.project(l.anchor));
    if (l.label == LineLabel::kVertical) ver.push_back(plane.project(l.anchor));
  }
  if (hor.size() != 4 || ver.size() != 4) {
    throw Error(ErrorCode::kWrongLineCount, "corner intersection needs 4 horizontal and 4 vertical lines");
  }
  std::sort(hor.begin(), hor.end(), [&](const Vec3& a, const Vec3& b) { return a.dot(up) > b.dot(up); });
  std::sort(ver.begin(), ver.end(), [&](const Vec3& a, const Vec3& b) { return a.dot(left) > b.dot(left); });

  auto meet = [&](const Vec3& a, const Vec3& b) {
    Eigen::Matrix<double, 3, 2> m;
    m.col(0) = h;
    m.col(1) = -v;
    const Eigen::Vector2d st = (m.transpose() * m).ldlt().solve(m.transpose() * (b - a));
    return plane.project(a + st(0) * h);
  };
  CornerGrid3D grid;
  grid.plane = plane;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const int base = 4 * (2 * r + c);
      grid.corners[base + 0] = meet(hor[2 * r], ver[2 * c]);
      grid.corners[base + 1] = meet(hor[2 * r], ver[2 * c + 1]);
      grid.corners[base + 2] = meet(hor[2 * r + 1], ver[2 * c + 1]);
      grid.corners[base + 3] = meet(hor[2 * r + 1], ver[2 * c]);
    }
  }
  return grid;
}

CloudExtraction extract_cloud_corners(std::span<const Vec3> cloud, const CloudThresholds& th, double fov_deg,
                                      int boards, std::uint64_t seed, const RansacOptions& plane_opts,
                                      const RansacOptions& line_opts) {
  th.validate();
  if (boards < 1) throw Error(ErrorCode::kInvalidArgument, "board count must be positive");
  CloudExtraction out;
  out.grid = voxelize(cloud, th, fov_deg);
  out.margins = extract_margins(out.grid, th);
  out.filtered = sparseness_filter(out.margins, th);
  if (out.filtered.size() < 3) throw Error(ErrorCode::kInsufficientPoints, "too few margin points survive");
  RansacOptions popts = plane_opts;
  popts.max_models = std::max(popts.max_models, boards);
  out.planes = ransac_plane(out.filtered.points, th, popts, seed);
  out.board_planes = select_board_planes(out.planes, th);
  if (static_cast<int>(out.board_planes.size()) < boards) {
    throw Error(ErrorCode::kNoBoardPlane, "found " + std::to_string(out.board_planes.size()) +
                                              " board-sized planes, expected " + std::to_string(boards));
  }
  out.board_planes.resize(boards);
  for (int b = 0; b < boards; ++b) {
    const Plane& plane = out.planes[out.board_planes[b]];
    const auto lines = ransac_lines(plane, th, line_opts, seed + 1 + b);
    const FusedLines fused = classify_fuse_lines(lines);
    out.lines.push_back(fused.lines);
    const auto interior = filter_board_edges(fused.lines, th);
    out.grids.push_back(intersect_corners(plane, fused.horizontal, fused.vertical, interior));
  }
  auto lateral = [](const CornerGrid3D& g) {
    double y = 0.0;
    for (const Vec3& c : g.corners) y += c.y();
    return y;
  };
  std::vector<std::size_t> order(out.grids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lateral(out.grids[a]) > lateral(out.grids[b]); });
  CloudExtraction sorted_out;
  for (std::size_t i : order) {
    sorted_out.board_planes.push_back(out.board_planes[i]);
    sorted_out.lines.push_back(std::move(out.lines[i]));
    sorted_out.grids.push_back(std::move(out.grids[i]));
  }
  out.board_planes = std::move(sorted_out.board_planes);
  out.lines = std::move(sorted_out.lines);
  out.grids = std::move(sorted_out.grids);
  return out;
}

}  // namespace sscalib
