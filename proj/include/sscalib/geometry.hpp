#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sscalib/error.hpp"

namespace sscalib {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec3 = Eigen::Vector3d;
using Pixel = Eigen::Vector2d;

// Rodrigues switches to the truncated series below this rotation angle.
inline constexpr double kSmallAngle = 1e-6;

/// skew(v) * w == v.cross(w)
template <typename Derived>
Matrix3<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& v) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  using Scalar = typename Derived::Scalar;
  Matrix3<Scalar> m;
  // clang-format off
  m << Scalar(0), -v(2),      v(1),
       v(2),      Scalar(0), -v(0),
      -v(1),      v(0),       Scalar(0);
  // clang-format on
  return m;
}

/// Rigid transform x -> R x + t. Used for the LiDAR-to-camera extrinsic and
/// for object placement in synthetic scenes.
template <typename Scalar>
class Pose {
 public:
  Pose() : rotation_(Matrix3<Scalar>::Identity()), translation_(Vector3<Scalar>::Zero()) {}
  Pose(const Matrix3<Scalar>& rotation, const Vector3<Scalar>& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose Identity() { return Pose(); }

  const Matrix3<Scalar>& rotation() const { return rotation_; }
  const Vector3<Scalar>& translation() const { return translation_; }

  Pose operator*(const Pose& rhs) const {
    return Pose(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_);
  }

  template <typename Derived>
  Vector3<Scalar> operator*(const Eigen::MatrixBase<Derived>& p) const {
    return rotation_ * p + translation_;
  }

  Pose inverse() const {
    Matrix3<Scalar> rt = rotation_.transpose();
    return Pose(rt, -(rt * translation_));
  }

  Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> m = Eigen::Matrix<Scalar, 4, 4>::Identity();
    m.template topLeftCorner<3, 3>() = rotation_;
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  /// Projects the rotation block back onto SO(3) (nearest orthogonal matrix).
  void reorthonormalize() {
    Eigen::JacobiSVD<Matrix3<Scalar>> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix3<Scalar> r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < Scalar(0)) {
      Matrix3<Scalar> u = svd.matrixU();
      u.col(2) *= Scalar(-1);
      r = u * svd.matrixV().transpose();
    }
    rotation_ = r;
  }

  template <typename Other>
  Pose<Other> cast() const {
    return Pose<Other>(rotation_.template cast<Other>(), translation_.template cast<Other>());
  }

 private:
  Matrix3<Scalar> rotation_;
  Vector3<Scalar> translation_;
};

using Pose3d = Pose<double>;

/// Tangent vector: rho is the translational part, phi the rotation vector.
/// Stacked as [rho; phi] wherever a 6-vector is used.
template <typename Scalar>
struct Twist {
  Vector3<Scalar> rho = Vector3<Scalar>::Zero();
  Vector3<Scalar> phi = Vector3<Scalar>::Zero();

  Twist() = default;
  Twist(const Vector3<Scalar>& rho_, const Vector3<Scalar>& phi_) : rho(rho_), phi(phi_) {}
  explicit Twist(const Vector6<Scalar>& xi) : rho(xi.template head<3>()), phi(xi.template tail<3>()) {}

  Vector6<Scalar> vector() const {
    Vector6<Scalar> xi;
    xi << rho, phi;
    return xi;
  }
};

using Twistd = Twist<double>;

/// exp([phi]x) by the Rodrigues formula, with a second-order series near zero.
template <typename Derived>
Matrix3<typename Derived::Scalar> so3_exp(const Eigen::MatrixBase<Derived>& phi) {
  using Scalar = typename Derived::Scalar;
  const Scalar theta = phi.norm();
  const Matrix3<Scalar> k = skew(phi);
  if (theta < Scalar(kSmallAngle)) {
    return Matrix3<Scalar>::Identity() + k + Scalar(0.5) * k * k;
  }
  const Scalar a = std::sin(theta) / theta;
  const Scalar half_sin = std::sin(Scalar(0.5) * theta);
  const Scalar b = Scalar(2) * half_sin * half_sin / (theta * theta);
  return Matrix3<Scalar>::Identity() + a * k + b * k * k;
}

/// Block exponential with the translation taken directly from rho (no left
/// Jacobian). The solver's perturbation Jacobian assumes this convention.
template <typename Scalar>
Pose<Scalar> exp_map(const Twist<Scalar>& xi) {
  return Pose<Scalar>(so3_exp(xi.phi), xi.rho);
}

template <typename Scalar>
Pose<Scalar> exp_map(const Vector6<Scalar>& xi) {
  return exp_map(Twist<Scalar>(xi));
}

/// Rotation angle (radians) of R_a^T R_b.
template <typename Scalar>
Scalar rotation_distance(const Matrix3<Scalar>& a, const Matrix3<Scalar>& b) {
  const Scalar c = ((a.transpose() * b).trace() - Scalar(1)) * Scalar(0.5);
  return std::acos(std::clamp(c, Scalar(-1), Scalar(1)));
}

/// Pinhole intrinsics plus 5-coefficient radial-tangential distortion.
template <typename Scalar>
struct CameraIntrinsics {
  Scalar fx = Scalar(600);
  Scalar fy = Scalar(600);
  Scalar cx = Scalar(320);
  Scalar cy = Scalar(270);
  Scalar k1 = Scalar(0), k2 = Scalar(0), k3 = Scalar(0);
  Scalar p1 = Scalar(0), p2 = Scalar(0);
  int width = 640;
  int height = 540;

  Matrix3<Scalar> matrix() const {
    Matrix3<Scalar> k;
    k << fx, Scalar(0), cx, Scalar(0), fy, cy, Scalar(0), Scalar(0), Scalar(1);
    return k;
  }

  bool has_distortion() const {
    return k1 != Scalar(0) || k2 != Scalar(0) || k3 != Scalar(0) || p1 != Scalar(0) || p2 != Scalar(0);
  }

  bool valid() const { return fx > Scalar(0) && fy > Scalar(0) && width > 0 && height > 0; }
};

using Intrinsics = CameraIntrinsics<double>;

inline constexpr double kMinDepth = 1e-9;

/// Ideal (undistorted) pinhole projection.
template <typename Derived, typename Scalar>
Vector2<Scalar> project(const Eigen::MatrixBase<Derived>& p_cam, const CameraIntrinsics<Scalar>& k) {
  if (!(p_cam(2) > Scalar(kMinDepth))) {
    throw Error(ErrorCode::kNonPositiveDepth, "point at depth " + std::to_string(double(p_cam(2))) +
                                                  " is not in front of the camera");
  }
  return Vector2<Scalar>(k.fx * p_cam(0) / p_cam(2) + k.cx, k.fy * p_cam(1) / p_cam(2) + k.cy);
}

namespace detail {

template <typename Scalar>
Vector2<Scalar> distort_normalized(const Vector2<Scalar>& x, const CameraIntrinsics<Scalar>& k) {
  const Scalar r2 = x.squaredNorm();
  const Scalar radial = Scalar(1) + r2 * (k.k1 + r2 * (k.k2 + r2 * k.k3));
  const Scalar xy = x(0) * x(1);
  return Vector2<Scalar>(x(0) * radial + Scalar(2) * k.p1 * xy + k.p2 * (r2 + Scalar(2) * x(0) * x(0)),
                         x(1) * radial + k.p1 * (r2 + Scalar(2) * x(1) * x(1)) + Scalar(2) * k.p2 * xy);
}

}  // namespace detail

/// Maps an ideal pixel to where the lens actually images it.
template <typename Scalar>
Vector2<Scalar> distort_pixel(const Vector2<Scalar>& p, const CameraIntrinsics<Scalar>& k) {
  const Vector2<Scalar> x((p(0) - k.cx) / k.fx, (p(1) - k.cy) / k.fy);
  const Vector2<Scalar> xd = detail::distort_normalized(x, k);
  return Vector2<Scalar>(k.fx * xd(0) + k.cx, k.fy * xd(1) + k.cy);
}

/// Inverse of distort_pixel by fixed-point iteration (at most 20 rounds).
template <typename Scalar>
Vector2<Scalar> undistort_pixel(const Vector2<Scalar>& p, const CameraIntrinsics<Scalar>& k) {
  if (!k.has_distortion()) return p;
  const Vector2<Scalar> xd((p(0) - k.cx) / k.fx, (p(1) - k.cy) / k.fy);
  Vector2<Scalar> x = xd;
  for (int iter = 0; iter < 20; ++iter) {
    const Scalar r2 = x.squaredNorm();
    const Scalar radial = Scalar(1) + r2 * (k.k1 + r2 * (k.k2 + r2 * k.k3));
    const Scalar xy = x(0) * x(1);
    const Vector2<Scalar> tangential(Scalar(2) * k.p1 * xy + k.p2 * (r2 + Scalar(2) * x(0) * x(0)),
                                     k.p1 * (r2 + Scalar(2) * x(1) * x(1)) + Scalar(2) * k.p2 * xy);
    x = (xd - tangential) / radial;
    const Vector2<Scalar> err = detail::distort_normalized(x, k) - xd;
    if (std::abs(err(0) * k.fx) < Scalar(1e-9) && std::abs(err(1) * k.fy) < Scalar(1e-9)) {
      return Vector2<Scalar>(k.fx * x(0) + k.cx, k.fy * x(1) + k.cy);
    }
  }
  throw Error(ErrorCode::kNoConvergence, "undistortion did not converge within 20 iterations");
}

// Unit-norm tolerance shared by Plane and SpatialLine.
inline constexpr double kUnitTolerance = 1e-9;

/// n . p + offset = 0, |n| = 1.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  std::vector<Vec3> inliers;

  double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
  Vec3 project(const Vec3& p) const { return p - signed_distance(p) * normal; }
};

enum class LineLabel { kUnlabeled, kHorizontal, kVertical };

struct SpatialLine {
  Vec3 anchor = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  int support = 0;
  LineLabel label = LineLabel::kUnlabeled;
  std::vector<Vec3> members;

  double distance(const Vec3& p) const { return (anchor - p).cross(direction).norm(); }
};

}  // namespace sscalib
