#pragma once

// Homogeneous geometry, the pinhole camera chain K * C * [R | -RT], plane
// parameterization, and homography algebra. Lengths in mm, image coordinates
// in px with the origin at the top-left pixel center and y pointing down.

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "shoulderscope/error.hpp"

namespace shoulderscope::geom {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend Point2 operator*(Point2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point2, Point2) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

struct HPoint2 {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
};

struct HPoint3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 1.0;
};

inline constexpr double kInfinityEps = 1e-12;

inline Point2 dehomogenize(const HPoint2& p) {
  if (std::abs(p.w) <= kInfinityEps) {
    throw Error(ErrorCode::kPointAtInfinity, "w = " + std::to_string(p.w));
  }
  return {p.x / p.w, p.y / p.w};
}

class CameraIntrinsics {
 public:
  /// f in mm, sx/sy pixel pitch in mm/px, principal point (ox, oy) in px.
  CameraIntrinsics(double f, double sx, double sy, double ox, double oy)
      : f_(f), sx_(sx), sy_(sy), ox_(ox), oy_(oy) {
    if (!(f > 0.0) || !(sx > 0.0) || !(sy > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "intrinsics need f, sx, sy > 0");
    }
  }

  double f() const { return f_; }
  double sx() const { return sx_; }
  double sy() const { return sy_; }
  double ox() const { return ox_; }
  double oy() const { return oy_; }
  double fx_px() const { return f_ / sx_; }
  double fy_px() const { return f_ / sy_; }

 private:
  double f_, sx_, sy_, ox_, oy_;
};

/// World-to-camera rotation R and camera center T; the extrinsic matrix is [R | -RT].
class CameraExtrinsics {
 public:
  CameraExtrinsics() : R_(Mat3::Identity()), T_(Vec3::Zero()) {}

  CameraExtrinsics(const Mat3& R, const Vec3& T) : R_(R), T_(T) {
    const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho < 1e-9) || !(std::abs(R.determinant() - 1.0) < 1e-9)) {
      throw Error(ErrorCode::kInvalidArgument, "R must be a proper rotation");
    }
  }

  const Mat3& R() const { return R_; }
  const Vec3& T() const { return T_; }

  Eigen::Matrix<double, 3, 4> matrix() const {
    Eigen::Matrix<double, 3, 4> m;
    m.leftCols<3>() = R_;
    m.col(3) = -R_ * T_;
    return m;
  }

 private:
  Mat3 R_;
  Vec3 T_;
};

/// Camera at `eye` looking at `target`; image x right, image y down.
inline CameraExtrinsics look_at(const Vec3& eye, const Vec3& target,
                                const Vec3& world_up = Vec3(0, 0, 1)) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(world_up);
  if (right.norm() < 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "view direction parallel to up vector");
  }
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 R;
  R.row(0) = right.transpose();
  R.row(1) = down.transpose();
  R.row(2) = forward.transpose();
  return CameraExtrinsics(R, eye);
}

/// Plane Q = origin + s * axis_a + t * axis_b (the 4x3 matrix U).
class PlaneFrame {
 public:
  PlaneFrame(const Vec3& origin, const Vec3& axis_a, const Vec3& axis_b)
      : origin_(origin), a_(axis_a), b_(axis_b) {
    if (a_.cross(b_).norm() <= 1e-12) {
      throw Error(ErrorCode::kInvalidArgument, "plane axes are parallel");
    }
  }

  static PlaneFrame canonical() {
    return PlaneFrame(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY());
  }

  const Vec3& origin() const { return origin_; }
  const Vec3& axis_a() const { return a_; }
  const Vec3& axis_b() const { return b_; }

  Eigen::Matrix<double, 4, 3> matrix() const {
    Eigen::Matrix<double, 4, 3> u = Eigen::Matrix<double, 4, 3>::Zero();
    u.block<3, 1>(0, 0) = a_;
    u.block<3, 1>(0, 1) = b_;
    u.block<3, 1>(0, 2) = origin_;
    u(3, 2) = 1.0;
    return u;
  }

 private:
  Vec3 origin_, a_, b_;
};

/// K * C: [[f/sx, 0, ox], [0, f/sy, oy], [0, 0, 1]].
inline Mat3 intrinsic_matrix(const CameraIntrinsics& c) {
  Mat3 k;
  k << c.fx_px(), 0.0, c.ox(), 0.0, c.fy_px(), c.oy(), 0.0, 0.0, 1.0;
  return k;
}

inline HPoint2 project_point(const CameraIntrinsics& intr, const CameraExtrinsics& extr,
                             const HPoint3& q) {
  if (std::abs(q.w) <= kInfinityEps) {
    throw Error(ErrorCode::kPointAtInfinity, "world point at infinity");
  }
  const Eigen::Vector4d qv(q.x / q.w, q.y / q.w, q.z / q.w, 1.0);
  const Vec3 cam = extr.matrix() * qv;
  if (!(cam.z() > 0.0)) {
    throw Error(ErrorCode::kBehindCamera, "depth " + std::to_string(cam.z()));
  }
  const Vec3 img = intrinsic_matrix(intr) * cam;
  return {img.x(), img.y(), img.z()};
}

inline HPoint3 plane_to_world(const PlaneFrame& pf, const HPoint2& p) {
  if (std::abs(p.w) <= kInfinityEps) {
    throw Error(ErrorCode::kPointAtInfinity, "plane point at infinity");
  }
  const Eigen::Vector4d q = pf.matrix() * Vec3(p.x, p.y, p.w);
  return {q(0), q(1), q(2), q(3)};
}

/// Determinant of m scaled to unit Frobenius norm; scale-free invertibility test.
inline double normalized_determinant(const Mat3& m) {
  const double n = m.norm();
  if (!(n > 0.0) || !std::isfinite(n)) return 0.0;
  return (m / n).determinant();
}

class Homography {
 public:
  Homography() : m_(Mat3::Identity()) {}

  explicit Homography(const Mat3& m) : m_(m) {
    if (!m.allFinite() || !(std::abs(normalized_determinant(m)) > 1e-12)) {
      throw Error(ErrorCode::kSingularMatrix, "homography is not invertible");
    }
  }

  const Mat3& matrix() const { return m_; }

  Homography inverse() const { return Homography(m_.inverse()); }

  /// q = H p, dehomogenized.
  Point2 apply(double x, double y) const {
    const Vec3 q = m_ * Vec3(x, y, 1.0);
    return dehomogenize({q.x(), q.y(), q.z()});
  }
  Point2 apply(Point2 p) const { return apply(p.x, p.y); }

  /// Unit Frobenius norm with the largest-magnitude entry made positive.
  Mat3 canonical() const {
    Mat3 n = m_ / m_.norm();
    Eigen::Index r = 0, c = 0;
    n.cwiseAbs().maxCoeff(&r, &c);
    if (n(r, c) < 0.0) n = -n;
    return n;
  }

  friend Homography operator*(const Homography& a, const Homography& b) {
    return Homography(a.m_ * b.m_);
  }

 private:
  Mat3 m_;
};

/// Equality up to nonzero scale: entrywise comparison of canonical forms.
inline bool approx_equal(const Homography& a, const Homography& b, double tol) {
  return (a.canonical() - b.canonical()).cwiseAbs().maxCoeff() <= tol;
}

inline Point2 apply(const Homography& h, double x, double y) { return h.apply(x, y); }

/// Plane coordinates -> image px: K * [R | -RT] * U.
inline Homography plane_to_image_homography(const CameraIntrinsics& intr,
                                            const CameraExtrinsics& extr,
                                            const PlaneFrame& pf) {
  const Mat3 m = intrinsic_matrix(intr) * extr.matrix() * pf.matrix();
  if (!(std::abs(normalized_determinant(m)) > 1e-12)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "plane passes through the optical center");
  }
  return Homography(m);
}

/// Maps view-2 points to view-1 points: h1 * h2^-1.
inline Homography compose_between_views(const Homography& h1, const Homography& h2) {
  return Homography(h1.matrix() * h2.inverse().matrix());
}

}  // namespace shoulderscope::geom
