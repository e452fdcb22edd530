#include "so3lap/so3.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace so3lap {

namespace {

constexpr double kQuatNormTol = 1e-12;
constexpr double kSmallAngle = 1e-6;
// Above this angle log_map switches to the quaternion route; the (R − Rᵀ)
// formula loses precision as sin θ → 0 near π.
constexpr double kQuaternionLogAngle = 3.0;

Vec3 skew_part(const Mat3& m) {
  return {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
}

}  // namespace

Rotation::Rotation(const Mat3& m) : m_(m) {
  if (!m.allFinite()) {
    throw std::invalid_argument("Rotation: non-finite entries");
  }
  const double ortho = (m.transpose() * m - Mat3::Identity()).norm();
  const double det = m.determinant();
  if (ortho > kRotationTol || std::abs(det - 1.0) > kRotationTol) {
    throw std::invalid_argument("Rotation: matrix is not in SO(3) (|RᵀR − I| = " +
                                std::to_string(ortho) + ", det = " + std::to_string(det) + ")");
  }
}

Rotation Rotation::inverse() const { return Rotation(m_.transpose(), Trusted{}); }

Rotation Rotation::operator*(const Rotation& other) const {
  return Rotation(m_ * other.m_, Trusted{});
}

UnitQuaternion UnitQuaternion::from_components(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!std::isfinite(n) || std::abs(n - 1.0) > kQuatNormTol) {
    throw std::invalid_argument("UnitQuaternion: norm deviates from 1");
  }
  return {w, x, y, z};
}

UnitQuaternion UnitQuaternion::normalized(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("UnitQuaternion: cannot normalize zero or non-finite vector");
  }
  return {w / n, x / n, y / n, z / n};
}

UnitQuaternion UnitQuaternion::canonical() const {
  for (double c : {w, x, y, z}) {
    if (c > 0.0) return *this;
    if (c < 0.0) return -*this;
  }
  return *this;
}

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Mat4 left_mult(const UnitQuaternion& p) {
  Mat4 m;
  m << p.w, -p.x, -p.y, -p.z,
       p.x,  p.w, -p.z,  p.y,
       p.y,  p.z,  p.w, -p.x,
       p.z, -p.y,  p.x,  p.w;
  return m;
}

Mat4 right_mult(const UnitQuaternion& p) {
  Mat4 m;
  m << p.w, -p.x, -p.y, -p.z,
       p.x,  p.w,  p.z, -p.y,
       p.y, -p.z,  p.w,  p.x,
       p.z,  p.y, -p.x,  p.w;
  return m;
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) {
  if ((m + m.transpose()).norm() > 1e-9) {
    throw std::invalid_argument("vee: matrix is not skew-symmetric");
  }
  return {m(2, 1), m(0, 2), m(1, 0)};
}

Rotation exp_map(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;  // sin θ / θ
  double b;  // (1 − cos θ) / θ²
  if (theta < kSmallAngle) {
    const double theta4 = theta2 * theta2;
    a = 1.0 - theta2 / 6.0 + theta4 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta4 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    const double half = std::sin(0.5 * theta);
    b = 2.0 * half * half / theta2;
  }
  const Mat3 w = hat(phi);
  return Rotation(Mat3::Identity() + a * w + b * w * w);
}

Vec3 log_map(const Rotation& r) {
  const Mat3& m = r.matrix();
  const Vec3 axis2 = skew_part(m);  // 2 sin θ · n
  const double sin_t = 0.5 * axis2.norm();
  const double cos_t = 0.5 * (m.trace() - 1.0);
  const double theta = std::atan2(sin_t, cos_t);

  if (theta > kQuaternionLogAngle) {
    const UnitQuaternion q = rot_to_quat(r);
    const Vec3 v(q.x, q.y, q.z);
    const double n = v.norm();
    return v / n * (2.0 * std::atan2(n, q.w));
  }
  double scale;  // θ / (2 sin θ)
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    scale = 0.5 * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0);
  } else {
    scale = 0.5 * theta / std::sin(theta);
  }
  return scale * axis2;
}

Rotation quat_to_rot(const UnitQuaternion& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 m;
  m << 1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * z * w, 2 * x * z + 2 * y * w,
       2 * x * y + 2 * z * w, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * x * w,
       2 * x * z - 2 * y * w, 2 * y * z + 2 * x * w, 1 - 2 * x * x - 2 * y * y;
  return Rotation(m);
}

UnitQuaternion rot_to_quat(const Rotation& r) {
  const Mat3& m = r.matrix();
  const double tr = m.trace();
  double w, x, y, z;
  // Shepperd: divide by the largest of the four candidate magnitudes.
  if (tr > 0.0) {
    const double s = 2.0 * std::sqrt(tr + 1.0);
    w = 0.25 * s;
    x = (m(2, 1) - m(1, 2)) / s;
    y = (m(0, 2) - m(2, 0)) / s;
    z = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
    w = (m(2, 1) - m(1, 2)) / s;
    x = 0.25 * s;
    y = (m(0, 1) + m(1, 0)) / s;
    z = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) > m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
    w = (m(0, 2) - m(2, 0)) / s;
    x = (m(0, 1) + m(1, 0)) / s;
    y = 0.25 * s;
    z = (m(1, 2) + m(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
    w = (m(1, 0) - m(0, 1)) / s;
    x = (m(0, 2) + m(2, 0)) / s;
    y = (m(1, 2) + m(2, 1)) / s;
    z = 0.25 * s;
  }
  return UnitQuaternion::normalized(w, x, y, z).canonical();
}

Mat3 ProperSvd::reconstruct() const {
  return u.matrix() * s.asDiagonal() * v.matrix().transpose();
}

ProperSvd proper_svd(const Mat3& a) {
  if (!a.allFinite()) {
    throw std::invalid_argument("proper_svd: non-finite parameter matrix");
  }
  Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Vec3 s = svd.singularValues();
  const double du = u.determinant() < 0.0 ? -1.0 : 1.0;
  const double dv = v.determinant() < 0.0 ? -1.0 : 1.0;
  u.col(2) *= du;
  v.col(2) *= dv;
  s(2) *= du * dv;
  return {Rotation(u), s, Rotation(v)};
}

double geodesic_distance(const Rotation& r1, const Rotation& r2) {
  const Mat3 m = r1.matrix().transpose() * r2.matrix();
  const double sin_t = 0.5 * skew_part(m).norm();
  const double cos_t = 0.5 * (m.trace() - 1.0);
  return std::atan2(sin_t, cos_t);
}

double chordal_distance(const Rotation& r1, const Rotation& r2) {
  return (r1.matrix() - r2.matrix()).squaredNorm();
}

Rotation wahba_solve(std::span<const Vec3> p, std::span<const Vec3> p_star) {
  if (p.size() != p_star.size()) {
    throw std::invalid_argument("wahba_solve: point sets differ in size");
  }
  if (p.size() < 2) {
    throw std::invalid_argument("wahba_solve: need at least two point pairs");
  }
  Mat3 b = Mat3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    b += p_star[i] * p[i].transpose();
  }
  const ProperSvd svd = proper_svd(b);
  const double s1 = svd.s(0);
  if (!(s1 > 0.0) || svd.s(1) <= 1e-10 * s1) {
    throw std::invalid_argument("wahba_solve: degenerate (collinear or zero) configuration");
  }
  return svd.uvt();
}

}  // namespace so3lap
