#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "so3lap/dist.hpp"

namespace so3lap {

QuaternionLaplace::QuaternionLaplace(const Mat4& m, const Vec3& z, double eps_clip)
    : m_(m), z_(z), eps_clip_(eps_clip) {
  if (!m.allFinite() || !z.allFinite()) {
    throw std::invalid_argument("QuaternionLaplace: non-finite parameter");
  }
  if ((m.transpose() * m - Mat4::Identity()).norm() > 1e-9) {
    throw std::invalid_argument("QuaternionLaplace: M must be orthogonal");
  }
  if (!(0.0 >= z(0) && z(0) >= z(1) && z(1) >= z(2))) {
    throw std::invalid_argument("QuaternionLaplace: need 0 >= z1 >= z2 >= z3");
  }
  if (!(eps_clip > 0.0)) {
    throw std::invalid_argument("QuaternionLaplace: eps_clip must be positive");
  }
}

double QuaternionLaplace::quadratic_form(const UnitQuaternion& q) const {
  const Vec4 p = m_.transpose() * q.coeffs();
  return -(z_(0) * p(1) * p(1) + z_(1) * p(2) * p(2) + z_(2) * p(3) * p(3));
}

namespace {

double ql_clipped(const QuaternionLaplace& d, const UnitQuaternion& q) {
  return std::max(d.eps_clip(), d.quadratic_form(q));
}

}  // namespace

double ql_log_pdf(const QuaternionLaplace& d, const UnitQuaternion& q, double f) {
  if (!(f > 0.0)) throw std::invalid_argument("ql_log_pdf: normalization must be positive");
  const double c = ql_clipped(d, q);
  return -std::log(f) - std::sqrt(c) - 0.5 * std::log(c);
}

double ql_norm_grid(const QuaternionLaplace& d, const S3Grid& grid) {
  double sum = 0.0;
  for (const auto& q : grid.quats) sum += rl_kernel(ql_clipped(d, q));
  return sum * grid.cell_weight;
}

QuaternionLaplace rl_to_ql(const RotationLaplace& d) {
  const ProperSvd& svd = d.svd();
  const Vec3& s = svd.s;
  if (s(1) + s(2) < -kModeTol) throw std::domain_error("rl_to_ql: requires s2 + s3 >= 0");
  // q = q_U ⊛ q′ ⊛ q_V⁻¹ carries the diagonal form in q′ to the frame of R.
  const Mat4 m = left_mult(rot_to_quat(svd.u)) * right_mult(rot_to_quat(svd.v)).transpose();
  const Vec3 z(-2.0 * (s(1) + s(2)), -2.0 * (s(0) + s(2)), -2.0 * (s(0) + s(1)));
  return QuaternionLaplace(m, z.cwiseMin(0.0), d.eps_clip());
}

}  // namespace so3lap
