#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "sscalib/registration.hpp"
#include "sscalib/synthesis.hpp"

using namespace sscalib;

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

CorrespondenceSet board_pairs(const Pose3d& extrinsic, const Intrinsics& k = Intrinsics{}) {
  BoardSpec b;
  b.pose_world = facing_board_pose(3.0, 0.1, 0.05, 20.0, 10.0, 12.0);
  CorrespondenceSet c;
  for (const Vec3& p : b.corners_world()) {
    c.points.push_back(p);
    c.pixels.push_back(project(extrinsic * p, k));
  }
  return c;
}

Pose3d perturb(const Pose3d& p, double deg, double meters, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
  const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
  return Pose3d(so3_exp(Vec3(axis * deg * std::numbers::pi / 180.0)), dir * meters) * p;
}

Pose3d random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Pose3d(so3_exp(Vec3(u(rng), u(rng), u(rng))), Vec3(0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng)));
}

double rot_err(const Pose3d& a, const Pose3d& b) { return rotation_distance(a.rotation(), b.rotation()); }
double trans_err(const Pose3d& a, const Pose3d& b) { return (a.translation() - b.translation()).norm(); }

}  // namespace

TEST(Register, GroundTruthPairsAllMatch) {
  BoardSpec b;
  b.pose_world = facing_board_pose(3.0, 0.1, 0.05, 20.0, 10.0, 12.0);
  const auto c3 = b.corners_world();
  std::vector<Pixel> c2;
  for (const Vec3& p : c3) c2.push_back(project(default_extrinsic() * p, Intrinsics{}));
  const CorrespondenceSet corr = register_corners(std::span<const Vec3>(c3), c2);
  ASSERT_EQ(corr.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(corr.points[i], c3[i]);
    EXPECT_EQ(corr.pixels[i], c2[i]);
  }
}

TEST(Register, RotatedImageListIsOrderingMismatch) {
  const CorrespondenceSet c = board_pairs(default_extrinsic());
  std::vector<Pixel> rotated(c.pixels.begin() + 4, c.pixels.end());
  rotated.insert(rotated.end(), c.pixels.begin(), c.pixels.begin() + 4);
  EXPECT_EQ(code_of([&] { register_corners(std::span<const Vec3>(c.points), rotated); }),
            ErrorCode::kOrderingMismatch);
}

TEST(Register, FifteenCornersRejected) {
  const CorrespondenceSet c = board_pairs(default_extrinsic());
  const std::vector<Vec3> fifteen(c.points.begin(), c.points.end() - 1);
  EXPECT_EQ(code_of([&] { register_corners(std::span<const Vec3>(fifteen), c.pixels); }),
            ErrorCode::kInvalidArgument);
}

TEST(Residual, ZeroAtTruth) {
  const CorrespondenceSet c = board_pairs(default_extrinsic());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_LT(residual(default_extrinsic(), c.points[i], c.pixels[i], Intrinsics{}).norm(), 1e-12);
  }
}

TEST(Residual, CameraXShift) {
  Intrinsics k;
  k.fx = k.fy = 500.0;
  const Vec3 p(0.1, -0.2, 2.0);
  const Pixel obs = project(p, k);
  const Pose3d shifted(Eigen::Matrix3d::Identity(), Vec3(0.01, 0, 0));
  const Pixel e = residual(shifted, p, obs, k);
  EXPECT_NEAR(e.x(), -2.5, 1e-12);
  EXPECT_NEAR(e.y(), 0.0, 1e-12);
}

TEST(Residual, BehindCamera) {
  EXPECT_EQ(code_of([] { residual(Pose3d{}, Vec3(0, 0, -1), Pixel(0, 0), Intrinsics{}); }),
            ErrorCode::kNonPositiveDepth);
  EXPECT_EQ(code_of([] { jacobian(Pose3d{}, Vec3(0, 0, -1), Intrinsics{}); }), ErrorCode::kNonPositiveDepth);
}

TEST(Jacobian, MatchesCentralDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    Intrinsics k;
    k.fx = 400 + 300 * (u(rng) + 1);
    k.fy = k.fx * (1 + 0.05 * u(rng));
    k.cx = 640 + 50 * u(rng);
    k.cy = 360 + 50 * u(rng);
    const Pose3d pose = random_pose(rng);
    Vec3 p;
    do {
      p = pose.inverse() * Vec3(u(rng), u(rng), 2.5 + 1.5 * u(rng));
    } while (!((pose * p).z() > 0.5));
    const Pixel obs(k.cx, k.cy);
    const Eigen::Matrix<double, 2, 6> j = jacobian(pose, p, k);
    for (int c = 0; c < 6; ++c) {
      Vector6<double> d = Vector6<double>::Zero();
      d(c) = h;
      const Pixel fd = (residual(exp_map(d) * pose, p, obs, k) - residual(exp_map(Vector6<double>(-d)) * pose, p, obs, k)) /
                       (2 * h);
      for (int r = 0; r < 2; ++r) {
        const double scale = std::max(1.0, std::abs(j(r, c)));
        EXPECT_LE(std::abs(fd(r) - j(r, c)) / scale, 1e-5) << trial << " (" << r << "," << c << ")";
      }
    }
  }
}

TEST(Jacobian, OpticalAxisPoint) {
  const Intrinsics k;
  const Eigen::Matrix<double, 2, 6> j = jacobian(Pose3d{}, Vec3(0, 0, 4), k);
  EXPECT_EQ(j(0, 2), 0.0);
  EXPECT_EQ(j(1, 2), 0.0);
}

TEST(Jacobian, TranslationBlockIsNegatedProjectionDerivative) {
  const Intrinsics k;
  const Pose3d pose = default_extrinsic();
  const Vec3 p(3.0, 0.4, -0.2);
  const Vec3 pc = pose * p;
  Eigen::Matrix<double, 2, 3> dproj;
  dproj << k.fx / pc.z(), 0, -k.fx * pc.x() / (pc.z() * pc.z()), 0, k.fy / pc.z(), -k.fy * pc.y() / (pc.z() * pc.z());
  const Eigen::Matrix<double, 2, 6> j = jacobian(pose, p, k);
  EXPECT_LT((j.leftCols<3>() + dproj).norm(), 1e-12 * dproj.norm());
}

TEST(Jacobian, LinearizationErrorIsQuadratic) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Intrinsics k;
  for (int trial = 0; trial < 20; ++trial) {
    const Pose3d pose = random_pose(rng);
    const Vec3 p = pose.inverse() * Vec3(0.5 * u(rng), 0.5 * u(rng), 3.0);
    Vector6<double> dir;
    for (int i = 0; i < 6; ++i) dir(i) = u(rng);
    dir *= 0.01 / dir.norm();
    const Pixel obs(0, 0);
    const Eigen::Matrix<double, 2, 6> j = jacobian(pose, p, k);
    auto err = [&](const Vector6<double>& d) {
      return (residual(exp_map(d) * pose, p, obs, k) - residual(pose, p, obs, k) - j * d).norm();
    };
    const double ratio = err(dir) / err(Vector6<double>(dir / 2));
    EXPECT_NEAR(ratio, 4.0, 0.3) << trial;
  }
}

TEST(SolvePnp, RecoversTruthFromPerturbedStart) {
  const Pose3d truth = default_extrinsic();
  const CorrespondenceSet c = board_pairs(truth);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SolverReport r = solve_pnp(c, Intrinsics{}, perturb(truth, 5.0, 0.2, seed));
    EXPECT_TRUE(r.converged);
    EXPECT_LT(rot_err(r.pose, truth), 1e-6);
    EXPECT_LT(trans_err(r.pose, truth), 1e-6);
  }
}

TEST(SolvePnp, StartAtTruthIsStationary) {
  const Pose3d truth = default_extrinsic();
  const CorrespondenceSet c = board_pairs(truth);
  const SolverReport r = solve_pnp(c, Intrinsics{}, truth);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_LT(r.final_rms, 1e-9);
  EXPECT_LT(rot_err(r.pose, truth), 1e-12);
}

TEST(SolvePnp, CollinearPointsSingular) {
  CorrespondenceSet c;
  const Pose3d truth = default_extrinsic();
  for (int i = 0; i < 16; ++i) {
    c.points.emplace_back(3.0, -0.5 + i * 0.06, 0.1);
    c.pixels.push_back(project(truth * c.points.back(), Intrinsics{}) + Pixel(0.3, -0.2));
  }
  EXPECT_EQ(code_of([&] { solve_pnp(c, Intrinsics{}, truth); }), ErrorCode::kSingularNormalEquations);
}

TEST(SolvePnp, BehindCameraStart) {
  const CorrespondenceSet c = board_pairs(default_extrinsic());
  const Pose3d flipped = Pose3d(so3_exp(Vec3(0, std::numbers::pi, 0)), Vec3::Zero()) * default_extrinsic();
  EXPECT_EQ(code_of([&] { solve_pnp(c, Intrinsics{}, flipped); }), ErrorCode::kDivergedBehindCamera);
}

TEST(SolvePnp, TooFewPairs) {
  CorrespondenceSet c = board_pairs(default_extrinsic());
  c.points.resize(5);
  c.pixels.resize(5);
  EXPECT_EQ(code_of([&] { solve_pnp(c, Intrinsics{}, default_extrinsic()); }), ErrorCode::kInvalidArgument);
}

TEST(SolvePnp, NoisyCornersConvergeQuicklyFromLinearGuess) {
  const Pose3d truth = default_extrinsic();
  const CorrespondenceSet clean = board_pairs(truth);
  int good = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.5);
    CorrespondenceSet c = clean;
    for (Pixel& px : c.pixels) px += Pixel(n(rng), n(rng));
    const SolverReport r = solve_pnp(c, Intrinsics{}, initial_guess(c, Intrinsics{}));
    if (r.converged && r.iterations < 20) ++good;
  }
  EXPECT_EQ(good, 50);
}

TEST(SolvePnp, OrthonormalOutput) {
  const Pose3d truth = default_extrinsic();
  const CorrespondenceSet c = board_pairs(truth);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::Matrix3d r = solve_pnp(c, Intrinsics{}, perturb(truth, 10.0, 0.3, seed)).pose.rotation();
    EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity()).norm(), 1e-9);
  }
}

TEST(SolvePnp, GaugeConsistency) {
  const Pose3d truth = default_extrinsic();
  CorrespondenceSet c = board_pairs(truth);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.5);
  for (Pixel& px : c.pixels) px += Pixel(n(rng), n(rng));
  const Pose3d init = perturb(truth, 3.0, 0.1, 5);
  const SolverReport a = solve_pnp(c, Intrinsics{}, init);

  const Pose3d m(so3_exp(Vec3(0.2, -0.1, 0.3)), Vec3(0.5, -0.2, 0.1));
  CorrespondenceSet moved = c;
  for (Vec3& p : moved.points) p = m * p;
  const SolverReport b = solve_pnp(moved, Intrinsics{}, init * m.inverse());
  const Pose3d back = b.pose * m;
  EXPECT_LT(rot_err(back, a.pose), 1e-7);
  EXPECT_LT(trans_err(back, a.pose), 1e-7);
}

TEST(SolvePnp, CostNeverIncreases) {
  const Pose3d truth = default_extrinsic();
  CorrespondenceSet c = board_pairs(truth);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Pixel& px : c.pixels) px += Pixel(n(rng), n(rng));
  const Pose3d init = perturb(truth, 8.0, 0.3, 2);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= 15; ++it) {
    SolverConfig cfg;
    cfg.max_iterations = it;
    const double rms = solve_pnp(c, Intrinsics{}, init, cfg).final_rms;
    EXPECT_LE(rms, prev + 1e-12) << it;
    prev = rms;
  }
}

TEST(SolvePnp, Deterministic) {
  const Pose3d truth = default_extrinsic();
  CorrespondenceSet c = board_pairs(truth);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.5);
  for (Pixel& px : c.pixels) px += Pixel(n(rng), n(rng));
  const Pose3d init = perturb(truth, 4.0, 0.1, 0);
  const SolverReport a = solve_pnp(c, Intrinsics{}, init);
  const SolverReport b = solve_pnp(c, Intrinsics{}, init);
  EXPECT_EQ(a.pose.rotation(), b.pose.rotation());
  EXPECT_EQ(a.pose.translation(), b.pose.translation());
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.per_point_residuals, b.per_point_residuals);
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg;
  cfg.damping_init = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kInvalidThreshold);
  cfg = SolverConfig{};
  cfg.damping_shrink = 1.5;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kInvalidThreshold);
}

TEST(InitialGuess, CoplanarBoardWithinBasin) {
  const Pose3d truth = default_extrinsic();
  const Pose3d g = initial_guess(board_pairs(truth), Intrinsics{});
  EXPECT_LT(rot_err(g, truth) * 180.0 / std::numbers::pi, 1.0);
  EXPECT_LT(trans_err(g, truth), 0.05);
}

TEST(InitialGuess, NonCoplanarPointsUseDlt) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Pose3d truth = default_extrinsic();
  CorrespondenceSet c;
  for (int i = 0; i < 20; ++i) {
    c.points.emplace_back(3.0 + u(rng), u(rng), 0.6 * u(rng));
    c.pixels.push_back(project(truth * c.points.back(), Intrinsics{}));
  }
  const Pose3d g = initial_guess(c, Intrinsics{});
  EXPECT_LT(rot_err(g, truth) * 180.0 / std::numbers::pi, 1.0);
  EXPECT_LT(trans_err(g, truth), 0.05);
}

TEST(InitialGuess, PlaneThroughCameraCenterSingular) {
  // Every point sits in a plane containing the optical center, so all
  // pixels fall on one image line.
  const Pose3d truth = default_extrinsic();
  const Pose3d inv = truth.inverse();
  CorrespondenceSet c;
  for (int i = 0; i < 16; ++i) {
    const Vec3 cam(-0.5 + 0.07 * i, 0.0, 2.0 + 0.1 * (i % 4));
    c.points.push_back(inv * cam);
    c.pixels.push_back(project(cam, Intrinsics{}));
  }
  EXPECT_EQ(code_of([&] { initial_guess(c, Intrinsics{}); }), ErrorCode::kSingularNormalEquations);
}

TEST(InitialGuess, CoincidentPointsSingular) {
  CorrespondenceSet c;
  for (int i = 0; i < 8; ++i) {
    c.points.emplace_back(3, 0, 0);
    c.pixels.emplace_back(640, 360);
  }
  EXPECT_EQ(code_of([&] { initial_guess(c, Intrinsics{}); }), ErrorCode::kSingularNormalEquations);
}
