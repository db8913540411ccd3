#include "sscalib/planar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sscalib {

namespace {

double cross(const Pixel& o, const Pixel& a, const Pixel& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

double segment_distance(const Pixel& p, const Pixel& a, const Pixel& b) {
  const Pixel ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

void douglas_peucker(std::span<const Pixel> pts, std::size_t first, std::size_t last, double eps,
                     std::vector<char>& keep) {
  if (last <= first + 1) return;
  double worst = -1.0;
  std::size_t index = first;
  for (std::size_t i = first + 1; i < last; ++i) {
    const double d = segment_distance(pts[i], pts[first], pts[last]);
    if (d > worst) {
      worst = d;
      index = i;
    }
  }
  if (worst > eps) {
    keep[index] = 1;
    douglas_peucker(pts, first, index, eps, keep);
    douglas_peucker(pts, index, last, eps, keep);
  }
}

}  // namespace

double polygon_area(std::span<const Pixel> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Pixel& a = polygon[i];
    const Pixel& b = polygon[(i + 1) % n];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

double polygon_perimeter(std::span<const Pixel> polygon, bool closed) {
  const std::size_t n = polygon.size();
  if (n < 2) return 0.0;
  double length = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) length += (polygon[i + 1] - polygon[i]).norm();
  if (closed) length += (polygon.front() - polygon.back()).norm();
  return length;
}

std::vector<Pixel> convex_hull(std::span<const Pixel> points) {
  std::vector<Pixel> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Pixel& a, const Pixel& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Pixel> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Pixel& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::array<Pixel, 4> RotatedRect::corners() const {
  const Pixel u = axis * (0.5 * width);
  const Pixel v = Pixel(-axis.y(), axis.x()) * (0.5 * height);
  return {center - u - v, center + u - v, center + u + v, center - u + v};
}

RotatedRect min_area_rect(std::span<const Pixel> hull) {
  RotatedRect best;
  if (hull.empty()) return best;
  if (hull.size() == 1) {
    best.center = hull.front();
    return best;
  }
  double best_area = std::numeric_limits<double>::infinity();
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    Pixel edge = hull[(i + 1) % n] - hull[i];
    const double len = edge.norm();
    if (len == 0.0) continue;
    const Pixel u = edge / len;
    const Pixel v(-u.y(), u.x());
    double min_u = std::numeric_limits<double>::infinity(), max_u = -min_u;
    double min_v = min_u, max_v = -min_u;
    for (const Pixel& p : hull) {
      const double pu = p.dot(u), pv = p.dot(v);
      min_u = std::min(min_u, pu);
      max_u = std::max(max_u, pu);
      min_v = std::min(min_v, pv);
      max_v = std::max(max_v, pv);
    }
    const double area = (max_u - min_u) * (max_v - min_v);
    if (area < best_area) {
      best_area = area;
      best.axis = u;
      best.width = max_u - min_u;
      best.height = max_v - min_v;
      best.center = u * (0.5 * (min_u + max_u)) + v * (0.5 * (min_v + max_v));
    }
  }
  return best;
}

std::vector<Pixel> simplify_closed(std::span<const Pixel> polygon, double epsilon) {
  const std::size_t n = polygon.size();
  if (n < 4) return {polygon.begin(), polygon.end()};
  // Split the ring at the vertex farthest from the first one so both halves
  // are open chains.
  std::size_t far = 0;
  double far_d = -1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = (polygon[i] - polygon[0]).squaredNorm();
    if (d > far_d) {
      far_d = d;
      far = i;
    }
  }
  std::vector<Pixel> ring(polygon.begin(), polygon.end());
  ring.push_back(polygon[0]);
  std::vector<char> keep(ring.size(), 0);
  keep[0] = keep[far] = keep[n] = 1;
  douglas_peucker(ring, 0, far, epsilon, keep);
  douglas_peucker(ring, far, n, epsilon, keep);
  std::vector<Pixel> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.push_back(ring[i]);
  }
  return out;
}

}  // namespace sscalib
