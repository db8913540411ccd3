#include "sscalib/registration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace sscalib {

namespace {

double cross2(const Pixel& a, const Pixel& b) { return a.x() * b.y() - a.y() * b.x(); }

bool all_in_front(const Pose3d& pose, const CorrespondenceSet& corr) {
  for (const Vec3& p : corr.points) {
    if (!((pose * p).z() > kMinDepth)) return false;
  }
  return true;
}

double cost_of(const Pose3d& pose, const CorrespondenceSet& corr, const Intrinsics& k) {
  double cost = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) cost += residual(pose, corr.points[i], corr.pixels[i], k).squaredNorm();
  return cost;
}

Matrix3<double> nearest_rotation(const Matrix3<double>& m) {
  Eigen::JacobiSVD<Matrix3<double>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3<double> u = svd.matrixU();
  if ((u * svd.matrixV().transpose()).determinant() < 0) u.col(2) *= -1.0;
  return u * svd.matrixV().transpose();
}

constexpr double kRankTolerance = 1e-10;

}  // namespace

CorrespondenceSet register_corners(std::span<const Vec3> corners3d, std::span<const Pixel> corners2d) {
  if (corners3d.size() != corners2d.size() || corners3d.empty() || corners3d.size() % 16 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "expected matching lists of 16 corners per board, got " +
                                                 std::to_string(corners3d.size()) + " and " +
                                                 std::to_string(corners2d.size()));
  }
  for (std::size_t base = 0; base < corners3d.size(); base += 16) {
    std::array<Vec3, 4> h3;
    std::array<Pixel, 4> h2;
    Vec3 centroid = Vec3::Zero();
    for (int hole = 0; hole < 4; ++hole) {
      h3[hole] = Vec3::Zero();
      h2[hole] = Pixel::Zero();
      for (int c = 0; c < 4; ++c) {
        h3[hole] += 0.25 * corners3d[base + 4 * hole + c];
        h2[hole] += 0.25 * corners2d[base + 4 * hole + c];
      }
      centroid += 0.25 * h3[hole];
    }
    auto fail = [&](const char* what) {
      throw Error(ErrorCode::kOrderingMismatch,
                  std::string("corner layout check failed for board ") + std::to_string(base / 16) + ": " + what);
    };
    if (!(h2[1].x() > h2[0].x() && h2[2].y() > h2[0].y())) fail("image holes are not in row-major order");
    const double side2 = cross2(h2[1] - h2[0], h2[2] - h2[0]);
    const double side3 = (h3[1] - h3[0]).cross(h3[2] - h3[0]).dot(centroid);
    if (!(side2 > 0 && side3 > 0)) fail("hole layouts have opposite handedness");
    for (int hole = 0; hole < 4; ++hole) {
      const std::size_t i = base + 4 * hole;
      const double q2 = cross2(corners2d[i + 1] - corners2d[i], corners2d[i + 2] - corners2d[i]);
      const double q3 = (corners3d[i + 1] - corners3d[i]).cross(corners3d[i + 2] - corners3d[i]).dot(centroid);
      if (!(q2 > 0 && q3 > 0)) fail("corner cycles within a hole disagree");
    }
  }
  CorrespondenceSet corr;
  corr.points.assign(corners3d.begin(), corners3d.end());
  corr.pixels.assign(corners2d.begin(), corners2d.end());
  return corr;
}

CorrespondenceSet register_corners(std::span<const CornerGrid3D> grids, std::span<const Pixel> corners2d) {
  std::vector<Vec3> flat;
  for (const CornerGrid3D& g : grids) flat.insert(flat.end(), g.corners.begin(), g.corners.end());
  return register_corners(std::span<const Vec3>(flat), corners2d);
}

void SolverConfig::validate() const {
  auto fail = [](const char* field) {
    throw Error(ErrorCode::kInvalidThreshold, std::string(field) + " must be positive");
  };
  if (max_iterations <= 0) fail("max_iterations");
  if (!(step_tolerance > 0)) fail("step_tolerance");
  if (!(residual_tolerance > 0)) fail("residual_tolerance");
  if (!(damping_init > 0)) fail("damping_init");
  if (!(damping_scale > 1)) throw Error(ErrorCode::kInvalidThreshold, "damping_scale must exceed 1");
  if (!(damping_shrink > 0 && damping_shrink < 1)) {
    throw Error(ErrorCode::kInvalidThreshold, "damping_shrink must lie in (0, 1)");
  }
}

SolverReport solve_pnp(const CorrespondenceSet& corr, const Intrinsics& k, const Pose3d& init,
                       const SolverConfig& cfg) {
  cfg.validate();
  const std::size_t n = corr.size();
  if (n < 6 || corr.pixels.size() != n) throw Error(ErrorCode::kInvalidArgument, "solver needs at least 6 pairs");
  if (!all_in_front(init, corr)) {
    throw Error(ErrorCode::kDivergedBehindCamera, "initial pose places corners behind the camera");
  }

  Pose3d pose = init;
  double cost = cost_of(pose, corr, k);
  double lambda = cfg.damping_init;
  int iterations = 0;
  bool converged = false;

  while (true) {
    if (std::sqrt(cost / n) < cfg.residual_tolerance) {
      converged = true;
      break;
    }
    if (iterations >= cfg.max_iterations) break;

    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Matrix<double, 2, 6> j = jacobian(pose, corr.points[i], k);
      const Eigen::Vector2d e = residual(pose, corr.points[i], corr.pixels[i], k);
      h += j.transpose() * j;
      g += j.transpose() * e;
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(h, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues()(0) > kRankTolerance * eig.eigenvalues()(5))) {
      throw Error(ErrorCode::kSingularNormalEquations, "normal equations have rank below 6");
    }

    bool stop = false;
    while (true) {
      const Eigen::Matrix<double, 6, 1> step =
          (h + lambda * Eigen::Matrix<double, 6, 6>::Identity()).ldlt().solve(-g);
      if (step.norm() < cfg.step_tolerance) {
        converged = true;
        stop = true;
        break;
      }
      const Pose3d candidate = exp_map(Vector6<double>(step)) * pose;
      if (all_in_front(candidate, corr)) {
        const double next = cost_of(candidate, corr, k);
        if (next < cost) {
          pose = candidate;
          cost = next;
          lambda = std::max(lambda * cfg.damping_shrink, 1e-15);
          break;
        }
      }
      lambda *= cfg.damping_scale;
      if (lambda > 1e30) {
        stop = true;
        break;
      }
    }
    if (stop) break;
    ++iterations;
    if (iterations % 10 == 0) pose.reorthonormalize();
  }
  pose.reorthonormalize();

  SolverReport report;
  report.pose = pose;
  report.iterations = iterations;
  report.converged = converged;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = residual(pose, corr.points[i], corr.pixels[i], k).norm();
    report.per_point_residuals.push_back(r);
    sum += r * r;
  }
  report.final_rms = std::sqrt(sum / n);
  return report;
}

Pose3d initial_guess(const CorrespondenceSet& corr, const Intrinsics& k) {
  const std::size_t n = corr.size();
  if (n < 6 || corr.pixels.size() != n) throw Error(ErrorCode::kInvalidArgument, "initial guess needs at least 6 pairs");

  Vec3 c = Vec3::Zero();
  for (const Vec3& p : corr.points) c += p;
  c /= static_cast<double>(n);
  Matrix3<double> cov = Matrix3<double>::Zero();
  double spread = 0.0;
  for (const Vec3& p : corr.points) {
    cov += (p - c) * (p - c).transpose();
    spread += (p - c).norm();
  }
  const double s = spread / n;
  if (!(s > 0)) throw Error(ErrorCode::kSingularNormalEquations, "all 3-D points coincide");
  const Eigen::SelfAdjointEigenSolver<Matrix3<double>> pca(cov);
  const Vec3 ev = pca.eigenvalues();
  if (ev(1) <= 1e-12 * ev(2)) throw Error(ErrorCode::kSingularNormalEquations, "3-D points are collinear");

  std::vector<Pixel> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = Pixel((corr.pixels[i].x() - k.cx) / k.fx, (corr.pixels[i].y() - k.cy) / k.fy);
  }

  if (ev(0) > 1e-10 * ev(2)) {
    // General 3-D configuration: 12-parameter DLT on centered, scaled points.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 q = (corr.points[i] - c) / s;
      const Eigen::Vector4d hq(q.x(), q.y(), q.z(), 1.0);
      a.block<1, 4>(2 * i, 0) = hq.transpose();
      a.block<1, 4>(2 * i, 8) = -x[i].x() * hq.transpose();
      a.block<1, 4>(2 * i + 1, 4) = hq.transpose();
      a.block<1, 4>(2 * i + 1, 8) = -x[i].y() * hq.transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv(10) > kRankTolerance * sv(0))) {
      throw Error(ErrorCode::kSingularNormalEquations, "DLT system is rank deficient");
    }
    const Eigen::VectorXd v = svd.matrixV().col(11);
    Matrix3<double> m;
    Vec3 p4;
    for (int r = 0; r < 3; ++r) {
      m.row(r) = v.segment<3>(4 * r).transpose();
      p4(r) = v(4 * r + 3);
    }
    if (m.determinant() < 0) {
      m = -m;
      p4 = -p4;
    }
    const Eigen::JacobiSVD<Matrix3<double>> msvd(m);
    const double scale = msvd.singularValues().mean();
    const Matrix3<double> r = nearest_rotation(m);
    Pose3d pose(r, p4 * (s / scale) - r * c);
    return pose;
  }

  // Coplanar points: homography from in-plane coordinates, then decompose.
  const Vec3 e1 = pca.eigenvectors().col(2);
  const Vec3 e2 = pca.eigenvectors().col(1);
  const Vec3 e3 = e1.cross(e2);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = (corr.points[i] - c) / s;
    const Eigen::Vector3d hq(d.dot(e1), d.dot(e2), 1.0);
    a.block<1, 3>(2 * i, 0) = hq.transpose();
    a.block<1, 3>(2 * i, 6) = -x[i].x() * hq.transpose();
    a.block<1, 3>(2 * i + 1, 3) = hq.transpose();
    a.block<1, 3>(2 * i + 1, 6) = -x[i].y() * hq.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(7) > kRankTolerance * sv(0))) {
    throw Error(ErrorCode::kSingularNormalEquations, "homography system is rank deficient");
  }
  const Eigen::VectorXd v = svd.matrixV().col(8);
  Matrix3<double> hm;
  hm << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  // A plane through the camera center images to a line and H drops rank.
  const Vec3 hsv = Eigen::JacobiSVD<Matrix3<double>>(hm).singularValues();
  if (!(hsv(2) > 1e-8 * hsv(0))) {
    throw Error(ErrorCode::kSingularNormalEquations, "board plane contains the camera center");
  }
  // Columns are mu*s*R*e1, mu*s*R*e2 and mu*(R*c + t).
  double mus = 0.5 * (hm.col(0).norm() + hm.col(1).norm());
  if (hm(2, 2) < 0) mus = -mus;
  const Vec3 r1 = hm.col(0) / mus;
  const Vec3 r2 = hm.col(1) / mus;
  Matrix3<double> q;
  q << r1, r2, r1.cross(r2);
  const Matrix3<double> r_board = nearest_rotation(q);
  Matrix3<double> basis;
  basis << e1, e2, e3;
  const Matrix3<double> r = r_board * basis.transpose();
  const Vec3 t = hm.col(2) * (s / mus) - r * c;
  return Pose3d(r, t);
}

}  // namespace sscalib
