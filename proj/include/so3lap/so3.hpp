// Rotation-group primitives: hat/vee, exponential and logarithm maps,
// quaternion conversion, proper SVD, distances and the Wahba solver.
#pragma once

#include <span>

#include <Eigen/Core>

namespace so3lap {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Tolerance used when validating orthonormality and det = +1.
inline constexpr double kRotationTol = 1e-9;

/// Element of SO(3). Construction from a raw matrix validates RᵀR = I and
/// det(R) = 1 to within kRotationTol.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}
  explicit Rotation(const Mat3& m);

  static Rotation identity() { return Rotation(); }

  const Mat3& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }

  Rotation inverse() const;
  Rotation operator*(const Rotation& other) const;
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

 private:
  struct Trusted {};
  Rotation(const Mat3& m, Trusted) : m_(m) {}

  Mat3 m_;
};

/// Unit quaternion (w, x, y, z), Hamilton convention.
struct UnitQuaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  /// Validating constructor: |q| must be 1 within 1e-12.
  static UnitQuaternion from_components(double w, double x, double y, double z);
  /// Normalizes an arbitrary nonzero 4-vector.
  static UnitQuaternion normalized(double w, double x, double y, double z);

  Vec4 coeffs() const { return {w, x, y, z}; }
  UnitQuaternion conjugate() const { return {w, -x, -y, -z}; }
  UnitQuaternion operator-() const { return {-w, -x, -y, -z}; }
  /// Representative with w >= 0; ties broken by x, then y, then z >= 0.
  UnitQuaternion canonical() const;
};

/// Hamilton product.
UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b);

/// 4x4 matrices with p ⊛ q = left_mult(p)·q and q ⊛ p = right_mult(p)·q.
Mat4 left_mult(const UnitQuaternion& p);
Mat4 right_mult(const UnitQuaternion& p);

Mat3 hat(const Vec3& v);
/// Throws std::invalid_argument if ‖m + mᵀ‖_F > 1e-9.
Vec3 vee(const Mat3& m);

Rotation exp_map(const Vec3& phi);
/// Returns φ with ‖φ‖ ≤ π.
Vec3 log_map(const Rotation& r);

Rotation quat_to_rot(const UnitQuaternion& q);
UnitQuaternion rot_to_quat(const Rotation& r);

/// A = U·diag(s)·Vᵀ with det U = det V = 1 and s1 ≥ s2 ≥ |s3|.
struct ProperSvd {
  Rotation u;
  Vec3 s;
  Rotation v;

  /// UVᵀ, the mode of both rotation distributions in the generic case.
  Rotation uvt() const { return u * v.inverse(); }
  Mat3 reconstruct() const;
};

ProperSvd proper_svd(const Mat3& a);

/// Geodesic angle in [0, π].
double geodesic_distance(const Rotation& r1, const Rotation& r2);
/// Squared Frobenius chordal distance ‖R1 − R2‖²_F.
double chordal_distance(const Rotation& r1, const Rotation& r2);

/// Rotation minimizing Σ‖p*ᵢ − R·pᵢ‖². Throws std::invalid_argument on size
/// mismatch or a degenerate (collinear / zero) configuration.
Rotation wahba_solve(std::span<const Vec3> p, std::span<const Vec3> p_star);

}  // namespace so3lap
