#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sscalib/config.hpp"
#include "sscalib/io.hpp"
#include "sscalib/image.hpp"

using namespace sscalib;
namespace fs = std::filesystem;

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

template <typename F>
std::string message_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sscalib_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

PointCloud sample_cloud(bool labels, bool colors) {
  PointCloud c;
  for (int i = 0; i < 50; ++i) {
    c.points.emplace_back(0.25 * i, -0.5 * i, 3.0 + 0.125 * i);
    if (labels) c.labels.push_back(static_cast<std::uint8_t>(i % 3));
    if (colors) {
      c.colors.push_back(Rgb{static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(2 * i), 7});
      c.colored.push_back(static_cast<std::uint8_t>(i % 2));
    }
  }
  return c;
}

void expect_same(const PointCloud& a, const PointCloud& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    // float32 on disk
    EXPECT_LT((a.points[i] - b.points[i]).norm(), 1e-5);
  }
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.colors, b.colors);
  EXPECT_EQ(a.colored, b.colored);
}

}  // namespace

using Io = TempDir;

TEST_F(Io, PlyRoundTripBinaryAndAscii) {
  for (bool labels : {false, true}) {
    for (bool colors : {false, true}) {
      const PointCloud c = sample_cloud(labels, colors);
      write_ply(dir_ / "b.ply", c, PlyFormat::kBinaryLittleEndian);
      write_ply(dir_ / "a.ply", c, PlyFormat::kAscii);
      expect_same(c, read_ply(dir_ / "b.ply"));
      expect_same(c, read_ply(dir_ / "a.ply"));
    }
  }
}

TEST_F(Io, TruncatedPlyNamesByteOffset) {
  write_ply(dir_ / "full.ply", sample_cloud(true, false));
  const std::string bytes = read_text(dir_ / "full.ply");
  write_text(dir_ / "cut.ply", bytes.substr(0, bytes.size() - 20));
  EXPECT_EQ(code_of([&] { read_ply(dir_ / "cut.ply"); }), ErrorCode::kParseError);
  EXPECT_NE(message_of([&] { read_ply(dir_ / "cut.ply"); }).find("at byte"), std::string::npos);
}

TEST_F(Io, BadPlyHeader) {
  write_text(dir_ / "bad.ply", "ply\nformat binary_big_endian 1.0\nelement vertex 1\nend_header\n");
  EXPECT_EQ(code_of([&] { read_ply(dir_ / "bad.ply"); }), ErrorCode::kParseError);
  write_text(dir_ / "notply.ply", "hello\n");
  EXPECT_EQ(code_of([&] { read_ply(dir_ / "notply.ply"); }), ErrorCode::kParseError);
}

TEST_F(Io, PlySkipsUnknownProperties) {
  write_text(dir_ / "extra.ply",
             "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float intensity\n"
             "property float y\nproperty float z\nend_header\n1 99 2 3\n4 98 5 6\n");
  const PointCloud c = read_ply(dir_ / "extra.ply");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[1], Vec3(4, 5, 6));
}

TEST_F(Io, CsvWithHeaderAndComments) {
  write_text(dir_ / "c.csv", "x,y,z\n# comment\n1,2,3\n\n4.5,-1,0.25\n");
  const PointCloud c = read_cloud(dir_ / "c.csv");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[0], Vec3(1, 2, 3));
  EXPECT_EQ(c.points[1], Vec3(4.5, -1, 0.25));
}

TEST_F(Io, CsvBadRow) {
  write_text(dir_ / "c.csv", "1,2,3\n4,five,6\n");
  EXPECT_EQ(code_of([&] { read_csv(dir_ / "c.csv"); }), ErrorCode::kParseError);
}

TEST_F(Io, MissingFile) {
  EXPECT_NE(code_of([&] { read_ply(dir_ / "nope.ply"); }), ErrorCode{});
}

TEST_F(Io, IntrinsicsRoundTrip) {
  Intrinsics k;
  k.fx = 812.5;
  k.fy = 809.25;
  k.cx = 640.125;
  k.cy = 359.5;
  k.k1 = -0.11;
  k.k2 = 0.03;
  write_text(dir_ / "k.json", intrinsics_to_json(k));
  const Intrinsics r = read_intrinsics(dir_ / "k.json");
  EXPECT_EQ(r.fx, k.fx);
  EXPECT_EQ(r.fy, k.fy);
  EXPECT_EQ(r.cx, k.cx);
  EXPECT_EQ(r.cy, k.cy);
  EXPECT_EQ(r.k1, k.k1);
  EXPECT_EQ(r.k2, k.k2);
  EXPECT_EQ(r.width, k.width);
  EXPECT_EQ(r.height, k.height);
  EXPECT_EQ(code_of([] { intrinsics_from_json("{\"fx\": -1}"); }) != ErrorCode{}, true);
}

TEST_F(Io, ImageRoundTripPngAndPgm) {
  Image gray(31, 17);
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) gray.at(x, y) = static_cast<std::uint8_t>((7 * x + 13 * y) % 256);
  }
  write_image(dir_ / "g.png", gray);
  write_image(dir_ / "g.pgm", gray);
  EXPECT_EQ(read_image(dir_ / "g.png"), gray);
  EXPECT_EQ(read_image(dir_ / "g.pgm"), gray);
  const Image rgb = gray.to_rgb();
  write_image(dir_ / "c.png", rgb);
  EXPECT_EQ(read_image(dir_ / "c.png"), rgb);
}

TEST(Config, ThreeMetrePreset) {
  const CalibrationConfig c = config_from_json(R"({"preset":"3m"})");
  EXPECT_EQ(c.cloud.margin_step_deg, 0.20);
  EXPECT_EQ(c.cloud.range_threshold, 0.2);
  EXPECT_EQ(c.cloud.plane_threshold, 0.05);
  EXPECT_EQ(c.cloud.line_threshold, 0.01);
}

TEST(Config, PresetRows) {
  const CalibrationConfig five = config_from_json(R"({"preset":"5m"})");
  EXPECT_EQ(five.cloud.margin_step_deg, 0.15);
  EXPECT_EQ(five.cloud.range_threshold, 0.4);
  EXPECT_EQ(five.cloud.plane_threshold, 0.05);
  EXPECT_EQ(five.cloud.line_threshold, 0.015);
  const CalibrationConfig eight = config_from_json(R"({"preset":"8m"})");
  EXPECT_EQ(eight.cloud.margin_step_deg, 0.10);
  EXPECT_EQ(eight.cloud.range_threshold, 0.5);
  EXPECT_EQ(eight.cloud.plane_threshold, 0.06);
  EXPECT_EQ(eight.cloud.line_threshold, 0.02);
}

TEST(Config, ExplicitKeyOverridesPreset) {
  const CalibrationConfig c = config_from_json(R"({"preset":"8m","plane_threshold":0.07})");
  EXPECT_EQ(c.cloud.plane_threshold, 0.07);
  EXPECT_EQ(c.cloud.margin_step_deg, 0.10);
  EXPECT_EQ(c.cloud.range_threshold, 0.5);
  EXPECT_EQ(c.cloud.line_threshold, 0.02);
}

TEST(Config, PresetArgumentBeatsDocument) {
  const CalibrationConfig c = config_from_json(R"({"preset":"3m"})", std::string("5m"));
  EXPECT_EQ(c.preset, "5m");
  EXPECT_EQ(c.cloud.range_threshold, 0.4);
}

TEST(Config, NegativeThresholdRejected) {
  EXPECT_EQ(code_of([] { config_from_json(R"({"line_threshold":-0.01})"); }), ErrorCode::kInvalidThreshold);
  EXPECT_NE(message_of([] { config_from_json(R"({"line_threshold":-0.01})"); }).find("line_threshold"),
            std::string::npos);
}

TEST(Config, UnknownKeyAndBadTypes) {
  EXPECT_EQ(code_of([] { config_from_json(R"({"plane_treshold":0.05})"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { config_from_json(R"({"plane_threshold":"0.05"})"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { config_from_json(R"({"preset":"4m"})"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { config_from_json("[1,2]"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { config_from_json("{"); }), ErrorCode::kParseError);
}

TEST(Config, RoundTripIsIdentity) {
  const CalibrationConfig a =
      config_from_json(R"({"preset":"5m","seed":42,"mode_min_points":3,"circularity_min":0.55,"damping_init":0.001})");
  const std::string text = config_to_json(a);
  const CalibrationConfig b = config_from_json(text);
  EXPECT_EQ(config_to_json(b), text);
  EXPECT_EQ(b.seed, 42u);
  EXPECT_EQ(b.cloud.mode_min_points, 3);
  EXPECT_EQ(b.image.circularity_range[0], 0.55);
}

TEST_F(Io, LoadConfigFromFile) {
  write_text(dir_ / "cfg.json", R"({"preset":"8m","seed":5})");
  const CalibrationConfig c = load_config(dir_ / "cfg.json");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.cloud.range_threshold, 0.5);
}
