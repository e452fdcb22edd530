#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "so3lap/dist.hpp"
#include "so3lap/rng.hpp"
#include "so3lap/specfun.hpp"

namespace so3lap {

namespace {

constexpr double kPi = std::numbers::pi;

double frobenius_dot(const Mat3& a, const Mat3& b) { return (a.array() * b.array()).sum(); }

}  // namespace

double rl_kernel(double c) {
  const double r = std::sqrt(c);
  return std::exp(-r) / r;
}

double rl_kernel_deriv(double c) {
  const double r = std::sqrt(c);
  return -0.5 * std::exp(-r) * (1.0 / c + 1.0 / (c * r));
}

RotationLaplace::RotationLaplace(const Mat3& a, double eps_clip)
    : a_(a), svd_(proper_svd(a)), eps_clip_(eps_clip) {
  if (!a.allFinite()) throw std::invalid_argument("RotationLaplace: non-finite parameter");
  if (!(eps_clip > 0.0)) throw std::invalid_argument("RotationLaplace: eps_clip must be positive");
}

TraceTerm rl_trace_term_detail(const RotationLaplace& d, const Rotation& r) {
  TraceTerm t;
  t.raw = d.svd().s.sum() - frobenius_dot(d.a(), r.matrix());
  const double floor = -1e-6 * std::max(1.0, d.svd().s(0));
  if (t.raw < floor) {
    throw std::runtime_error("rl_trace_term: tr(S - A^T R) = " + std::to_string(t.raw) +
                             " is negative; inconsistent decomposition");
  }
  t.clip_active = t.raw < d.eps_clip();
  t.clipped = t.clip_active ? d.eps_clip() : t.raw;
  return t;
}

double rl_trace_term(const RotationLaplace& d, const Rotation& r) {
  return rl_trace_term_detail(d, r).clipped;
}

double rl_log_pdf(const RotationLaplace& d, const Rotation& r, double f) {
  if (!(f > 0.0)) throw std::invalid_argument("rl_log_pdf: normalization must be positive");
  const double c = rl_trace_term(d, r);
  return -std::log(f) - std::sqrt(c) - 0.5 * std::log(c);
}

double rl_norm_grid(const RotationLaplace& d, const So3Grid& grid) {
  double sum = 0.0;
  for (const auto& r : grid.rotations) sum += rl_kernel(rl_trace_term(d, r));
  return sum * grid.cell_weight;
}

double rl_norm_isotropic(double s) {
  if (!(s > 0.0)) throw std::domain_error("rl_norm_isotropic: s must be positive");
  return struve_bessel_gap(2.0 * std::sqrt(s)) / std::sqrt(s);
}

double rl_norm_isotropic_deriv(double s) {
  if (!(s > 0.0)) throw std::domain_error("rl_norm_isotropic_deriv: s must be positive");
  const SeriesConfig cfg = full_precision();
  const long double ls = s;
  const long double x = 2.0L * std::sqrt(ls);
  const long double s15 = ls * std::sqrt(ls);
  const long double a = 1.0L / (2.0L * std::numbers::pi_v<long double> * s15);
  const long double b = detail::struve_l_ld(-1, x, cfg) / (2.0L * s15);
  const long double c =
      (detail::struve_l_ld(-2, x, cfg) + detail::struve_l_ld(0, x, cfg)) / (2.0L * ls);
  const long double e = detail::hyp0f1_reg_ld(3.0L, ls, cfg);
  const long double value = a - b + c - e;
  const long double scale = std::max({std::fabs(a), std::fabs(b), std::fabs(c), std::fabs(e)});
  if (!(std::fabs(value) > 1e6L * 16.0L * std::numeric_limits<long double>::epsilon() * scale)) {
    throw std::domain_error("rl_norm_isotropic_deriv: cancellation leaves too few digits");
  }
  return static_cast<double>(value);
}

double rl_norm_integral(double s1, double s2, double s3) {
  const double t1 = 2.0 * (s2 + s3);
  const double t2 = 2.0 * (s1 + s3);
  const double t3 = 2.0 * (s1 + s2);
  if (!(t1 >= 0.0 && t1 < t2 && t2 < t3)) {
    throw std::invalid_argument("rl_norm_integral: requires 0 <= t1 < t2 < t3");
  }
  // Both pieces are written in u = |k − t2| so the complementary elliptic
  // parameter, which vanishes at t2, is formed without cancellation.
  const double w12 = t2 - t1;
  const double w23 = t3 - t2;
  const double w13 = t3 - t1;
  auto lower = [&](double u) {
    const double k = t2 - u;
    if (u <= 0.0 || k <= 0.0) return 0.0;
    const double m1 = w13 * u / (w12 * (w23 + u));
    return struve_bessel_gap(std::sqrt(k)) * elliptic_k_complement(std::min(m1, 1.0)) /
           std::sqrt(k * w12 * (t3 - k));
  };
  auto upper = [&](double u) {
    const double k = t2 + u;
    if (u <= 0.0) return 0.0;
    const double m1 = w13 * u / (w23 * (w12 + u));
    return struve_bessel_gap(std::sqrt(k)) * elliptic_k_complement(std::min(m1, 1.0)) /
           std::sqrt(k * w23 * (k - t1));
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double tol = 1e-10;
  const double a = integrator.integrate(lower, 0.0, w12, tol);
  const double b = integrator.integrate(upper, 0.0, w23, tol);
  return 2.0 / kPi * (a + b);
}

Rotation ModeFamily::member(const UnitQuaternion& q) const {
  const double y = dof >= 2 ? q.y : 0.0;
  return u * quat_to_rot(UnitQuaternion::normalized(q.w, q.x, y, 0.0)) * v.inverse();
}

ModeResult rl_mode(const RotationLaplace& d) {
  const Vec3& s = d.svd().s;
  if (s(1) + s(2) > kModeTol) return UniqueMode{d.svd().uvt()};
  if (s(0) + s(2) > kModeTol) return ModeFamily{1, d.svd().u, d.svd().v};
  if (s(0) + s(1) > kModeTol) return ModeFamily{2, d.svd().u, d.svd().v};
  return IllDefined{};
}

Rotation rl_chordal_mean(const RotationLaplace& d) {
  const Vec3& s = d.svd().s;
  if (!(s(1) + s(2) > kModeTol)) {
    throw std::domain_error("rl_chordal_mean: mean is not unique when s2 + s3 = 0");
  }
  return d.svd().uvt();
}

Mat3 rl_tangent_cov(const RotationLaplace& d) {
  const Vec3& s = d.svd().s;
  if (!(s(1) + s(2) > kModeTol)) {
    throw std::domain_error("rl_tangent_cov: requires s2 + s3 > 0");
  }
  const Vec3 diag(4.0 / (s(1) + s(2)), 4.0 / (s(0) + s(2)), 4.0 / (s(0) + s(1)));
  const Mat3& v = d.svd().v.matrix();
  return v * diag.asDiagonal() * v.transpose();
}

Mat3 rl_mean_isotropic(double s) {
  const double f = rl_norm_isotropic(s);
  const double df = rl_norm_isotropic_deriv(s);
  const double e = -1.0 / 3.0 + 2.0 * df / (3.0 * f) + 2.0 / (3.0 * kPi * std::pow(s, 1.5) * f);
  return e * Mat3::Identity();
}

double rl_entropy(const RotationLaplace& d, const So3Grid& grid) {
  const double f = rl_norm_grid(d, grid);
  const double log_f = std::log(f);
  double sum = 0.0;
  for (const auto& r : grid.rotations) {
    const double c = rl_trace_term(d, r);
    const double log_p = -log_f - std::sqrt(c) - 0.5 * std::log(c);
    sum += std::exp(log_p) * log_p;
  }
  return -sum * grid.cell_weight;
}

std::vector<Rotation> rl_sample(const RotationLaplace& d, const So3Grid& grid, std::size_t n,
                                std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("rl_sample: n must be at least 1");
  if (grid.rotations.empty()) throw std::invalid_argument("rl_sample: empty grid");
  std::vector<double> cdf(grid.size());
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    total += rl_kernel(rl_trace_term(d, grid.rotations[i]));
    cdf[i] = total;
  }
  const double radius = covering_radius_estimate(grid, 256, seed);
  Rng rng(seed);
  std::vector<Rotation> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()),
                                           grid.size() - 1);
    out.push_back(grid.rotations[idx] * exp_map(random_in_ball(rng, radius)));
  }
  return out;
}

}  // namespace so3lap
