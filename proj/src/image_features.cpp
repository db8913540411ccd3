#include "sscalib/image_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "sscalib/planar.hpp"

namespace sscalib {

namespace {

// Neighbour offsets, counter-clockwise on screen starting to the right.
constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};

int direction_to(int fx, int fy, int tx, int ty) {
  for (int d = 0; d < 8; ++d) {
    if (fx + kDx[d] == tx && fy + kDy[d] == ty) return d;
  }
  return -1;
}

constexpr double kSimplifyEpsilon = 1.0;
constexpr double kCollapseDistance = 2.0;

}  // namespace

ContourShape make_contour(std::vector<Pixel> pixels, bool is_hole_border) {
  ContourShape c;
  c.pixels = std::move(pixels);
  c.is_hole_border = is_hole_border;
  c.area = std::abs(polygon_area(c.pixels));
  c.perimeter = polygon_perimeter(simplify_closed(c.pixels, kSimplifyEpsilon));
  const std::vector<Pixel> hull = convex_hull(c.pixels);
  c.hull_area = std::abs(polygon_area(hull));
  c.mer_area = min_area_rect(hull).area();
  return c;
}

ImageThresholds ImageThresholds::resolved(int width, int height) const {
  ImageThresholds out = *this;
  const double total = static_cast<double>(width) * height;
  if (!(out.area_min > 0)) out.area_min = 0.001 * total;
  if (!(out.area_max > 0)) out.area_max = 0.20 * total;
  return out;
}

void ImageThresholds::validate() const {
  auto fail = [](const char* field, const char* why) {
    throw Error(ErrorCode::kInvalidThreshold, std::string(field) + " " + why);
  };
  if (area_min > 0 && area_max > 0 && !(area_min < area_max)) fail("area_min", "must be smaller than area_max");
  if (area_min < 0) fail("area_min", "must not be negative");
  if (area_max < 0) fail("area_max", "must not be negative");
  if (!(rectangularity_max >= 1.0)) fail("rectangularity_max", "must be at least 1");
  if (!(circularity_range[0] > 0 && circularity_range[0] < circularity_range[1] && circularity_range[1] <= 1.0)) {
    fail("circularity_range", "must satisfy 0 < lo < hi <= 1");
  }
}

Image rectify(const Image& img, const Intrinsics& k) {
  if (!k.has_distortion()) return img;
  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Pixel src = distort_pixel(Pixel(x, y), k);
      for (int c = 0; c < img.channels; ++c) {
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(img.sample(src.x(), src.y(), c, 0.0)));
      }
    }
  }
  return out;
}

int otsu_threshold(const Image& gray) {
  if (gray.channels != 1) throw Error(ErrorCode::kInvalidArgument, "Otsu threshold needs a grayscale image");
  std::array<double, 256> hist{};
  for (std::uint8_t v : gray.data) hist[v] += 1.0;
  const double total = static_cast<double>(gray.data.size());
  double sum = 0.0;
  for (int i = 0; i < 256; ++i) sum += i * hist[i];
  double weight_bg = 0.0, sum_bg = 0.0, best = -1.0;
  int threshold = 0;
  for (int t = 0; t < 256; ++t) {
    weight_bg += hist[t];
    if (weight_bg == 0.0) continue;
    const double weight_fg = total - weight_bg;
    if (weight_fg == 0.0) break;
    sum_bg += t * hist[t];
    const double mean_bg = sum_bg / weight_bg;
    const double mean_fg = (sum - sum_bg) / weight_fg;
    const double between = weight_bg * weight_fg * (mean_bg - mean_fg) * (mean_bg - mean_fg);
    if (between > best) {
      best = between;
      threshold = t;
    }
  }
  if (best <= 0.0) throw Error(ErrorCode::kUniformImage, "image has no intensity variation");
  return threshold;
}

Image binarize(const Image& gray_in) {
  const Image gray = gray_in.to_gray();
  const int t = otsu_threshold(gray);
  Image out(gray.width, gray.height, 1);
  for (std::size_t i = 0; i < gray.data.size(); ++i) out.data[i] = gray.data[i] > t ? 255 : 0;
  return out;
}

std::vector<ContourShape> trace_contours(const Image& binary) {
  const int w = binary.width + 2, h = binary.height + 2;
  std::vector<int> f(static_cast<std::size_t>(w) * h, 0);
  auto at = [&](int x, int y) -> int& { return f[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y < binary.height; ++y) {
    for (int x = 0; x < binary.width; ++x) at(x + 1, y + 1) = binary.at(x, y, 0) ? 1 : 0;
  }

  std::vector<ContourShape> contours;
  int nbd = 1;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const int v = at(x, y);
      int start_dir;
      bool hole;
      if (v == 1 && at(x - 1, y) == 0) {
        start_dir = 4;
        hole = false;
      } else if (v >= 1 && at(x + 1, y) == 0) {
        start_dir = 0;
        hole = true;
      } else {
        continue;
      }
      ++nbd;
      std::vector<Pixel> chain;

      int first_dir = -1;
      for (int k = 0; k < 8; ++k) {
        const int d = (start_dir - k + 8) % 8;
        if (at(x + kDx[d], y + kDy[d]) != 0) {
          first_dir = d;
          break;
        }
      }
      if (first_dir < 0) {
        at(x, y) = -nbd;
        chain.emplace_back(x - 1, y - 1);
        contours.push_back(make_contour(std::move(chain), hole));
        continue;
      }
      const int x1 = x + kDx[first_dir], y1 = y + kDy[first_dir];
      int x2 = x1, y2 = y1, x3 = x, y3 = y;
      while (true) {
        const int back = direction_to(x3, y3, x2, y2);
        bool right_is_zero = false;
        int x4 = x3, y4 = y3;
        for (int k = 1; k <= 8; ++k) {
          const int d = (back + k) % 8;
          const int qx = x3 + kDx[d], qy = y3 + kDy[d];
          if (at(qx, qy) != 0) {
            x4 = qx;
            y4 = qy;
            break;
          }
          if (d == 0) right_is_zero = true;
        }
        if (right_is_zero) {
          at(x3, y3) = -nbd;
        } else if (at(x3, y3) == 1) {
          at(x3, y3) = nbd;
        }
        chain.emplace_back(x3 - 1, y3 - 1);
        if (x4 == x && y4 == y && x3 == x1 && y3 == y1) break;
        x2 = x3;
        y2 = y3;
        x3 = x4;
        y3 = y4;
      }
      contours.push_back(make_contour(std::move(chain), hole));
    }
  }
  return contours;
}

double rectangularity(const ContourShape& c) {
  if (!(c.hull_area > 0)) throw Error(ErrorCode::kDegenerateContour, "contour has zero hull area");
  return c.mer_area / c.hull_area;
}

double circularity(const ContourShape& c) {
  if (!(c.perimeter > 0)) throw Error(ErrorCode::kDegenerateContour, "contour has zero perimeter");
  return 4.0 * std::numbers::pi * c.area / (c.perimeter * c.perimeter);
}

std::vector<std::size_t> contour_filter(const std::vector<ContourShape>& contours, const ImageThresholds& th,
                                        std::size_t expected) {
  std::vector<std::size_t> kept;
  std::ostringstream diag;
  int listed = 0;
  for (std::size_t i = 0; i < contours.size(); ++i) {
    const ContourShape& c = contours[i];
    if (!c.is_hole_border || c.hull_area <= 0 || c.perimeter <= 0) continue;
    const double rect = rectangularity(c), circ = circularity(c);
    const bool ok = c.area >= th.area_min && c.area <= th.area_max && rect <= th.rectangularity_max &&
                    circ >= th.circularity_range[0] && circ <= th.circularity_range[1];
    if (ok) kept.push_back(i);
    if (c.area >= 0.25 * th.area_min && listed < 12) {
      diag << "\n  contour " << i << ": area " << c.area << " rectangularity " << rect << " circularity " << circ
           << (ok ? " (kept)" : " (rejected)");
      ++listed;
    }
  }
  if (kept.size() != expected) {
    throw Error(ErrorCode::kWrongContourCount, std::to_string(kept.size()) + " hole contours pass the filter, expected " +
                                                   std::to_string(expected) + diag.str());
  }
  return kept;
}

std::array<Pixel, 4> order_quad_corners(const std::array<Pixel, 4>& corners) {
  const Pixel center = 0.25 * (corners[0] + corners[1] + corners[2] + corners[3]);
  std::array<std::pair<double, Pixel>, 4> polar;
  for (int i = 0; i < 4; ++i) {
    const Pixel d = corners[i] - center;
    polar[i] = {std::atan2(d.y(), d.x()), corners[i]};
  }
  std::sort(polar.begin(), polar.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const double target = -0.75 * std::numbers::pi;
  int start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    double diff = std::abs(polar[i].first - target);
    diff = std::min(diff, 2.0 * std::numbers::pi - diff);
    if (diff < best) {
      best = diff;
      start = i;
    }
  }
  std::array<Pixel, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = polar[(start + i) % 4].second;
  return out;
}

CornerQuad extract_quad(const ContourShape& c, std::uint64_t seed, int contour_id) {
  const auto& px = c.pixels;
  if (px.size() < 4) throw Error(ErrorCode::kCollapsedQuad, "contour too short for four corners");
  auto farthest = [&](auto&& score) {
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double s = score(px[i]);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    return px[best];
  };
  std::mt19937_64 rng(seed);
  const Pixel start = px[rng() % px.size()];
  const Pixel c1 = farthest([&](const Pixel& p) { return (p - start).squaredNorm(); });
  const Pixel c2 = farthest([&](const Pixel& p) { return (p - c1).squaredNorm(); });
  // Unsquared: with squared distances c1 and c2 themselves tie with the
  // remaining corners of a square.
  const Pixel c3 = farthest([&](const Pixel& p) { return (p - c1).norm() + (p - c2).norm(); });
  const Pixel c4 = farthest([&](const Pixel& p) { return (p - c3).squaredNorm(); });
  const std::array<Pixel, 4> raw = {c1, c2, c3, c4};
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      if ((raw[i] - raw[j]).norm() < kCollapseDistance) {
        throw Error(ErrorCode::kCollapsedQuad, "two quad corners coincide within 2 px");
      }
    }
  }
  CornerQuad q;
  q.corners = order_quad_corners(raw);
  q.contour_id = contour_id;
  return q;
}

std::vector<Pixel> order_quads(std::vector<CornerQuad> quads) {
  if (quads.empty() || quads.size() % 4 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "quad count must be a positive multiple of 4");
  }
  constexpr double kMinGap = 10.0;
  std::stable_sort(quads.begin(), quads.end(),
                   [](const CornerQuad& a, const CornerQuad& b) { return a.centroid().x() < b.centroid().x(); });
  std::vector<Pixel> out;
  for (std::size_t g = 0; g < quads.size(); g += 4) {
    std::array<CornerQuad, 4> group = {quads[g], quads[g + 1], quads[g + 2], quads[g + 3]};
    std::stable_sort(group.begin(), group.end(),
                     [](const CornerQuad& a, const CornerQuad& b) { return a.centroid().y() < b.centroid().y(); });
    const double row_gap = std::min(group[2].centroid().y(), group[3].centroid().y()) -
                           std::max(group[0].centroid().y(), group[1].centroid().y());
    if (row_gap < kMinGap) throw Error(ErrorCode::kAmbiguousLayout, "hole centroids do not split into two rows");
    for (int row = 0; row < 2; ++row) {
      CornerQuad& a = group[2 * row];
      CornerQuad& b = group[2 * row + 1];
      if (b.centroid().x() < a.centroid().x()) std::swap(a, b);
      if (b.centroid().x() - a.centroid().x() < kMinGap) {
        throw Error(ErrorCode::kAmbiguousLayout, "hole centroids do not split into two columns");
      }
    }
    for (const CornerQuad& q : group) out.insert(out.end(), q.corners.begin(), q.corners.end());
  }
  return out;
}

ImageExtraction extract_image_corners(const Image& img, const Intrinsics& k, const ImageThresholds& th_in,
                                      int boards, std::uint64_t seed) {
  if (boards < 1) throw Error(ErrorCode::kInvalidArgument, "board count must be positive");
  th_in.validate();
  ImageExtraction out;
  out.rectified = rectify(img.to_gray(), k);
  out.binary = binarize(out.rectified);
  out.contours = trace_contours(out.binary);
  const ImageThresholds th = th_in.resolved(img.width, img.height);
  out.selected = contour_filter(out.contours, th, 4 * static_cast<std::size_t>(boards));
  for (std::size_t id : out.selected) {
    out.quads.push_back(extract_quad(out.contours[id], seed + id, static_cast<int>(id)));
  }
  out.corners = order_quads(out.quads);
  return out;
}

}  // namespace sscalib
