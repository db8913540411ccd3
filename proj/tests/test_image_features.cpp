#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "sscalib/image_features.hpp"
#include "sscalib/pipeline.hpp"
#include "sscalib/planar.hpp"
#include "support/raster.hpp"

using namespace sscalib;
using sscalib::testing::raster_disk;
using sscalib::testing::raster_polygon;
using sscalib::testing::square;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

const ContourShape& first_outer(const std::vector<ContourShape>& cs) {
  for (const ContourShape& c : cs) {
    if (!c.is_hole_border) return c;
  }
  throw std::runtime_error("no outer border");
}

std::vector<Pixel> rect_poly(double x0, double y0, double x1, double y1) {
  return {Pixel(x0, y0), Pixel(x1, y0), Pixel(x1, y1), Pixel(x0, y1)};
}

// Outer border of a filled raster polygon.
ContourShape outer_of(int w, int h, const std::vector<Pixel>& poly) {
  return first_outer(trace_contours(raster_polygon(w, h, poly)));
}

CornerQuad quad_at(double cx, double cy, double half = 10.0) {
  CornerQuad q;
  q.corners = {Pixel(cx - half, cy - half), Pixel(cx + half, cy - half), Pixel(cx + half, cy + half),
               Pixel(cx - half, cy + half)};
  return q;
}

struct Shot {
  SceneSpec scene;
  SyntheticImage image;
};

const Shot& default_shot() {
  static const Shot s = [] {
    Shot out;
    out.scene = make_scene(SceneLayout{});
    out.image = render_image(out.scene, Intrinsics{}, default_extrinsic(), NoiseSpec{}, 0);
    return out;
  }();
  return s;
}

}  // namespace

TEST(Rectify, ZeroDistortionIsIdentity) {
  const Image& img = default_shot().image.image;
  EXPECT_EQ(rectify(img, Intrinsics{}), img);
}

TEST(Rectify, StraightensBarrelDistortion) {
  Intrinsics k;
  k.k1 = -0.2;
  // A bright half-plane whose straight edge passes off-center; rendered by
  // sampling the ideal scene at each distorted pixel's undistorted location.
  Image img(k.width, k.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Pixel u = undistort_pixel(Pixel(x, y), k);
      if (u.y() < 0.2 * u.x() + 60.0) img.at(x, y) = 255;
    }
  }
  auto residual = [](const Image& im) {
    // Edge position per column from the first dark pixel, then line fit.
    std::vector<Pixel> edge;
    for (int x = 40; x < im.width - 40; ++x) {
      for (int y = 0; y + 1 < im.height; ++y) {
        if (im.at(x, y) >= 128 && im.at(x, y + 1) < 128) {
          edge.emplace_back(x, y + 0.5);
          break;
        }
      }
    }
    Eigen::MatrixXd a(edge.size(), 2);
    Eigen::VectorXd b(edge.size());
    for (std::size_t i = 0; i < edge.size(); ++i) {
      a(i, 0) = edge[i].x();
      a(i, 1) = 1.0;
      b(i) = edge[i].y();
    }
    const Eigen::Vector2d fit = a.colPivHouseholderQr().solve(b);
    return (a * fit - b).cwiseAbs().maxCoeff();
  };
  EXPECT_GT(residual(img), 2.0);
  // Column-wise edge positions are quantized to whole pixels.
  EXPECT_LT(residual(rectify(img, k)), 1.0);
}

TEST(Rectify, OutsideSourceIsBlack) {
  Intrinsics k;
  k.k1 = 0.5;
  const Image img(k.width, k.height, 1, 255);
  const Image r = rectify(img, k);
  EXPECT_EQ(r.at(0, 0), 0);
  EXPECT_EQ(r.at(k.width / 2, k.height / 2), 255);
}

TEST(Binarize, BimodalSplit) {
  Image img(20, 10);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 20; ++x) img.at(x, y) = x < 8 ? 50 : 200;
  }
  const int t = otsu_threshold(img);
  EXPECT_GE(t, 50);
  EXPECT_LT(t, 200);
  const Image b = binarize(img);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 20; ++x) EXPECT_EQ(b.at(x, y), x < 8 ? 0 : 255);
  }
}

TEST(Binarize, ConstantImageRejected) {
  EXPECT_EQ(code_of([] { binarize(Image(8, 8, 1, 77)); }), ErrorCode::kUniformImage);
}

TEST(Binarize, RenderedHolesAreBackground) {
  const Shot& s = default_shot();
  const Image b = binarize(s.image.image);
  const auto& c = s.image.corners_exact;
  for (int h = 0; h < 4; ++h) {
    // Shrunk toward the centroid so edge pixels with partial coverage are skipped.
    std::vector<Pixel> hole(c.begin() + 4 * h, c.begin() + 4 * h + 4);
    const Pixel mid = (hole[0] + hole[1] + hole[2] + hole[3]) / 4.0;
    for (Pixel& v : hole) v = mid + 0.85 * (v - mid);
    for (int y = 0; y < b.height; ++y) {
      for (int x = 0; x < b.width; ++x) {
        if (sscalib::testing::inside_polygon(hole, x, y)) ASSERT_EQ(b.at(x, y), 0) << x << "," << y;
      }
    }
  }
}

TEST(TraceContours, FilledSquareBorder) {
  Image img(20, 20);
  for (int y = 5; y < 15; ++y) {
    for (int x = 5; x < 15; ++x) img.at(x, y) = 255;
  }
  const auto cs = trace_contours(img);
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_FALSE(cs[0].is_hole_border);
  EXPECT_EQ(cs[0].pixels.size(), 36u);
}

TEST(TraceContours, SquareWithHole) {
  Image img(20, 20);
  for (int y = 2; y < 18; ++y) {
    for (int x = 2; x < 18; ++x) img.at(x, y) = (x >= 8 && x < 12 && y >= 8 && y < 12) ? 0 : 255;
  }
  const auto cs = trace_contours(img);
  ASSERT_EQ(cs.size(), 2u);
  const int holes = std::count_if(cs.begin(), cs.end(), [](const ContourShape& c) { return c.is_hole_border; });
  EXPECT_EQ(holes, 1);
}

TEST(TraceContours, EmptyImageHasNoContours) { EXPECT_TRUE(trace_contours(Image(10, 10)).empty()); }

TEST(TraceContours, ForegroundTouchingBorder) {
  const auto cs = trace_contours(Image(100, 100, 1, 255));
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].pixels.size(), 396u);
}

TEST(TraceContours, EveryBoundaryPixelInExactlyOneContour) {
  const Image b = binarize(default_shot().image.image);
  std::map<std::pair<int, int>, int> owners;
  for (const ContourShape& c : trace_contours(b)) {
    std::set<std::pair<int, int>> mine;
    for (const Pixel& p : c.pixels) mine.emplace(int(p.x()), int(p.y()));
    for (const auto& p : mine) ++owners[p];
  }
  auto fg = [&](int x, int y) { return b.contains(x, y) && b.at(x, y) != 0; };
  std::size_t boundary = 0;
  for (int y = 0; y < b.height; ++y) {
    for (int x = 0; x < b.width; ++x) {
      if (!fg(x, y)) continue;
      const bool edge = !fg(x - 1, y) || !fg(x + 1, y) || !fg(x, y - 1) || !fg(x, y + 1);
      if (!edge) continue;
      ++boundary;
      const auto it = owners.find({x, y});
      ASSERT_NE(it, owners.end()) << x << "," << y;
      EXPECT_EQ(it->second, 1) << x << "," << y;
    }
  }
  EXPECT_EQ(owners.size(), boundary);
}

TEST(ShapeMetrics, Square) {
  const ContourShape c = outer_of(300, 300, square(Pixel(150, 150), 200, 0));
  EXPECT_NEAR(rectangularity(c), 1.0, 0.02);
  EXPECT_NEAR(circularity(c) / (std::numbers::pi / 4), 1.0, 0.03);
}

TEST(ShapeMetrics, Disk) {
  const ContourShape c = first_outer(trace_contours(raster_disk(300, 300, 150, 150, 110)));
  EXPECT_NEAR(rectangularity(c) / (4.0 / std::numbers::pi), 1.0, 0.02);
  EXPECT_NEAR(circularity(c), 1.0, 0.03);
}

TEST(ShapeMetrics, SlenderRectangle) {
  const ContourShape c = outer_of(1000, 100, rect_poly(50, 20, 850, 60));
  const double expected = 4 * std::numbers::pi * 20 / (42.0 * 42.0);
  EXPECT_NEAR(circularity(c) / expected, 1.0, 0.05);
}

TEST(ShapeMetrics, TriangleMatchesBruteForceMer) {
  const ContourShape c = outer_of(300, 300, {Pixel(40, 40), Pixel(240, 240), Pixel(40, 240)});
  const std::vector<Pixel> hull = convex_hull(c.pixels);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3600; ++i) {
    const double a = i * std::numbers::pi / 3600.0;
    const Pixel u(std::cos(a), std::sin(a)), v(-std::sin(a), std::cos(a));
    double u0 = 1e9, u1 = -1e9, v0 = 1e9, v1 = -1e9;
    for (const Pixel& p : hull) {
      u0 = std::min(u0, p.dot(u));
      u1 = std::max(u1, p.dot(u));
      v0 = std::min(v0, p.dot(v));
      v1 = std::max(v1, p.dot(v));
    }
    best = std::min(best, (u1 - u0) * (v1 - v0));
  }
  EXPECT_NEAR(rectangularity(c), best / std::abs(polygon_area(hull)), 1e-3);
}

TEST(ShapeMetrics, BoundsHoldForRenderedContours) {
  for (const ContourShape& c : trace_contours(binarize(default_shot().image.image))) {
    if (c.hull_area <= 0 || c.perimeter <= 0) continue;
    EXPECT_GE(rectangularity(c), 0.98);
    EXPECT_GT(circularity(c), 0.0);
    EXPECT_LE(circularity(c), 1.03);
  }
}

TEST(ShapeMetrics, DegenerateContourRejected) {
  ContourShape c;
  EXPECT_EQ(code_of([&] { rectangularity(c); }), ErrorCode::kDegenerateContour);
  EXPECT_EQ(code_of([&] { circularity(c); }), ErrorCode::kDegenerateContour);
}

TEST(ContourFilter, KeepsTheFourHoles) {
  const Image b = binarize(default_shot().image.image);
  const auto cs = trace_contours(b);
  const auto kept = contour_filter(cs, ImageThresholds{}.resolved(b.width, b.height));
  ASSERT_EQ(kept.size(), 4u);
  for (std::size_t i : kept) EXPECT_TRUE(cs[i].is_hole_border);
}

TEST(ContourFilter, SlitRejected) {
  Image img = binarize(default_shot().image.image);
  // Cut a 40x2 slit into solid board below the holes.
  const auto& c = default_shot().image.corners_exact;
  const int y = static_cast<int>(std::max(c[11].y(), c[14].y())) + 15;
  const int x = static_cast<int>(c[11].x());
  for (int dy = 0; dy < 3; ++dy) {
    for (int dx = 0; dx < 60; ++dx) img.at(x + dx, y + dy) = 0;
  }
  const auto cs = trace_contours(img);
  EXPECT_EQ(cs.size(), trace_contours(binarize(default_shot().image.image)).size() + 1);
  const ImageThresholds th = ImageThresholds{}.resolved(img.width, img.height);
  const auto kept = contour_filter(cs, th);
  EXPECT_EQ(kept.size(), 4u);
}

TEST(ContourFilter, ThreeHolesIsWrongCount) {
  Image img = binarize(default_shot().image.image);
  const auto& c = default_shot().image.corners_exact;
  // Fill the first hole.
  const std::vector<Pixel> hole(c.begin(), c.begin() + 4);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (sscalib::testing::inside_polygon(hole, x, y)) img.at(x, y) = 255;
    }
  }
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Pixel p(x, y);
      bool near = false;
      for (int i = 0; i < 4; ++i) near = near || (p - c[i]).norm() < 3.0;
      if (near) img.at(x, y) = 255;
    }
  }
  const auto cs = trace_contours(img);
  EXPECT_EQ(code_of([&] { contour_filter(cs, ImageThresholds{}.resolved(img.width, img.height)); }),
            ErrorCode::kWrongContourCount);
}

TEST(ExtractQuad, AxisAlignedSquare) {
  const ContourShape c = first_outer(trace_contours(Image(100, 100, 1, 255)));
  const CornerQuad q = extract_quad(c, 0);
  const std::array<Pixel, 4> truth = {Pixel(0, 0), Pixel(99, 0), Pixel(99, 99), Pixel(0, 99)};
  for (int i = 0; i < 4; ++i) EXPECT_LE((q.corners[i] - truth[i]).norm(), 1.0) << i;
}

TEST(ExtractQuad, RotatedSquare) {
  const auto truth = square(Pixel(100, 100), 100, 30);
  const ContourShape c = outer_of(200, 200, truth);
  const CornerQuad q = extract_quad(c, 3);
  for (const Pixel& v : q.corners) {
    double best = 1e9;
    for (const Pixel& t : truth) best = std::min(best, (v - t).norm());
    EXPECT_LE(best, 1.5);
  }
}

TEST(ExtractQuad, SeedInvariant) {
  for (double deg : {0.0, 30.0, 17.0}) {
    const ContourShape c = outer_of(200, 200, square(Pixel(100, 100), 100, deg));
    const CornerQuad ref = extract_quad(c, 0);
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const CornerQuad q = extract_quad(c, seed);
      for (int i = 0; i < 4; ++i) ASSERT_EQ(q.corners[i], ref.corners[i]) << deg << " deg, seed " << seed;
    }
  }
}

TEST(ExtractQuad, CanonicalOrderStartsUpperLeft) {
  const ContourShape c = outer_of(200, 200, square(Pixel(100, 100), 100, 10));
  const CornerQuad q = extract_quad(c, 0);
  EXPECT_LT(q.corners[0].x(), q.corners[1].x());
  EXPECT_LT(q.corners[1].y(), q.corners[2].y());
  EXPECT_GT(q.corners[2].x(), q.corners[3].x());
  EXPECT_LT(q.corners[0].y(), q.corners[3].y());
}

TEST(ExtractQuad, TinyContourCollapses) {
  Image img(10, 10);
  img.at(4, 4) = img.at(5, 4) = img.at(4, 5) = img.at(5, 5) = 255;
  const ContourShape c = first_outer(trace_contours(img));
  EXPECT_EQ(code_of([&] { extract_quad(c, 0); }), ErrorCode::kCollapsedQuad);
}

TEST(OrderQuads, RowMajorLayout) {
  const std::vector<CornerQuad> quads = {quad_at(100, 100), quad_at(200, 100), quad_at(100, 200), quad_at(200, 200)};
  const auto out = order_quads(quads);
  ASSERT_EQ(out.size(), 16u);
  for (int q = 0; q < 4; ++q) {
    for (int i = 0; i < 4; ++i) EXPECT_EQ(out[4 * q + i], quads[q].corners[i]);
  }
}

TEST(OrderQuads, PermutationInvariant) {
  std::vector<CornerQuad> quads = {quad_at(100, 100), quad_at(210, 95), quad_at(95, 205), quad_at(205, 200)};
  const auto ref = order_quads(quads);
  std::sort(quads.begin(), quads.end(), [](const CornerQuad& a, const CornerQuad& b) {
    return a.centroid().x() + a.centroid().y() < b.centroid().x() + b.centroid().y();
  });
  do {
    EXPECT_EQ(order_quads(quads), ref);
  } while (std::next_permutation(quads.begin(), quads.end(), [](const CornerQuad& a, const CornerQuad& b) {
    return a.centroid().x() + 1000 * a.centroid().y() < b.centroid().x() + 1000 * b.centroid().y();
  }));
}

TEST(OrderQuads, CollinearCentroidsAmbiguous) {
  const std::vector<CornerQuad> quads = {quad_at(100, 100), quad_at(200, 100), quad_at(300, 100), quad_at(400, 100)};
  EXPECT_EQ(code_of([&] { order_quads(quads); }), ErrorCode::kAmbiguousLayout);
}

TEST(ImageCorners, NoiselessRenderWithinOnePixel) {
  const Shot& s = default_shot();
  const ImageExtraction ex = extract_image_corners(s.image.image, Intrinsics{}, ImageThresholds{});
  ASSERT_EQ(ex.corners.size(), 16u);
  double worst = 0.0;
  for (int i = 0; i < 16; ++i) worst = std::max(worst, (ex.corners[i] - s.image.corners_exact[i]).norm());
  EXPECT_LE(worst, 1.0);
}

TEST(ImageCorners, DistortedRenderRecovered) {
  Intrinsics k;
  k.k1 = -0.15;
  k.k2 = 0.02;
  const SceneSpec scene = make_scene(SceneLayout{});
  const SyntheticImage shot = render_image(scene, k, default_extrinsic(), NoiseSpec{}, 0);
  const ImageExtraction ex = extract_image_corners(shot.image, k, ImageThresholds{});
  for (int i = 0; i < 16; ++i) EXPECT_LT((ex.corners[i] - shot.corners_exact[i]).norm(), 2.0) << i;
}

TEST(ImageThresholds, InvalidRangesRejected) {
  ImageThresholds th;
  th.circularity_range = {0.9, 0.6};
  EXPECT_EQ(code_of([&] { th.validate(); }), ErrorCode::kInvalidThreshold);
  th = ImageThresholds{};
  th.area_min = 500;
  th.area_max = 100;
  EXPECT_EQ(code_of([&] { th.validate(); }), ErrorCode::kInvalidThreshold);
}
