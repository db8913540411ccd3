#pragma once

#include <span>
#include <vector>

#include "sscalib/cloud_features.hpp"
#include "sscalib/geometry.hpp"

namespace sscalib {

/// Pair i of `points` (LiDAR frame) and `pixels` (rectified image) is the
/// same physical corner.
struct CorrespondenceSet {
  std::vector<Vec3> points;
  std::vector<Pixel> pixels;

  std::size_t size() const { return points.size(); }
};

/// Pairs hole-major corner lists index by index after checking that both
/// sides describe the same 2x2 layout with the same handedness.
CorrespondenceSet register_corners(std::span<const CornerGrid3D> grids, std::span<const Pixel> corners2d);
CorrespondenceSet register_corners(std::span<const Vec3> corners3d, std::span<const Pixel> corners2d);

/// Observed minus projected pixel.
template <typename Scalar>
Vector2<Scalar> residual(const Pose<Scalar>& pose, const Vector3<Scalar>& point, const Vector2<Scalar>& pixel,
                         const CameraIntrinsics<Scalar>& k) {
  return pixel - project(pose * point, k);
}

/// d residual / d xi for the left update pose <- exp(xi) * pose, xi = [rho; phi].
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 6> jacobian(const Pose<Scalar>& pose, const Vector3<Scalar>& point,
                                     const CameraIntrinsics<Scalar>& k) {
  const Vector3<Scalar> pc = pose * point;
  if (!(pc.z() > Scalar(kMinDepth))) {
    throw Error(ErrorCode::kNonPositiveDepth, "point behind the camera while linearizing");
  }
  const Scalar iz = Scalar(1) / pc.z();
  Eigen::Matrix<Scalar, 2, 3> dproj;
  dproj << k.fx * iz, Scalar(0), -k.fx * pc.x() * iz * iz,  //
      Scalar(0), k.fy * iz, -k.fy * pc.y() * iz * iz;
  Eigen::Matrix<Scalar, 3, 6> dpoint;
  dpoint << Matrix3<Scalar>::Identity(), -skew(pc);
  return -dproj * dpoint;
}

struct SolverConfig {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
  double residual_tolerance = 1e-8;  // px, RMS
  double damping_init = 1e-4;
  double damping_scale = 10.0;   // lambda *= scale on a rejected step
  double damping_shrink = 0.3;   // lambda *= shrink on an accepted step

  void validate() const;
};

struct SolverReport {
  Pose3d pose;
  int iterations = 0;
  double final_rms = 0.0;
  std::vector<double> per_point_residuals;  // Euclidean, px
  bool converged = false;
};

/// Levenberg-Marquardt on the reprojection cost with left-multiplicative
/// updates. Returns converged = false (rather than throwing) when the
/// iteration budget runs out.
SolverReport solve_pnp(const CorrespondenceSet& corr, const Intrinsics& k, const Pose3d& init,
                       const SolverConfig& cfg = {});

/// Linear estimate: 3-D DLT for general point sets, homography decomposition
/// when the points are coplanar.
Pose3d initial_guess(const CorrespondenceSet& corr, const Intrinsics& k);

}  // namespace sscalib
