#include "so3lap/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace so3lap {

namespace {

constexpr double kMaxArg = 700.0;

// Σ t_k with t_{k+1} = t_k·ratio(k). Terms are summed until they stop
// mattering relative to the running sum, once past the peak.
template <typename Ratio>
long double sum_series(long double t0, Ratio ratio, const SeriesConfig& cfg, const char* what) {
  long double term = t0;
  long double sum = t0;
  for (int k = 0; k < cfg.max_terms; ++k) {
    const long double r = ratio(k);
    term *= r;
    sum += term;
    if (std::fabs(r) < 1.0L && std::fabs(term) <= cfg.tol * std::fabs(sum)) return sum;
    if (term == 0.0L) return sum;
  }
  throw std::runtime_error(std::string(what) + ": series did not converge in " +
                           std::to_string(cfg.max_terms) + " terms");
}

void check_arg(double x, const char* what) {
  if (!(x >= 0.0) || x > kMaxArg) {
    throw std::domain_error(std::string(what) + ": argument must lie in [0, 700], got " +
                            std::to_string(x));
  }
}

}  // namespace

void SeriesConfig::validate() const {
  if (max_terms < 10) throw std::invalid_argument("SeriesConfig: max_terms must be >= 10");
  if (!(tol > 0.0)) throw std::invalid_argument("SeriesConfig: tol must be positive");
}

namespace detail {

long double bessel_i_ld(int nu, long double x, const SeriesConfig& cfg) {
  cfg.validate();
  if (nu != 0 && nu != 1) {
    throw std::invalid_argument("bessel_i: order must be 0 or 1, got " + std::to_string(nu));
  }
  check_arg(static_cast<double>(x), "bessel_i");
  if (x == 0.0L) return nu == 0 ? 1.0L : 0.0L;
  const long double h2 = 0.25L * x * x;
  const long double t0 = nu == 0 ? 1.0L : 0.5L * x;
  return sum_series(
      t0, [&](int k) { return h2 / ((k + 1.0L) * (k + nu + 1.0L)); }, cfg, "bessel_i");
}

long double struve_l_ld(int nu, long double x, const SeriesConfig& cfg) {
  cfg.validate();
  if (nu < -2 || nu > 2) {
    throw std::invalid_argument("struve_l: order must be in [-2, 2], got " + std::to_string(nu));
  }
  check_arg(static_cast<double>(x), "struve_l");
  if (nu == -2 && x == 0.0L) throw std::domain_error("struve_l: L_{-2} is singular at 0");
  if (x == 0.0L) return nu == -1 ? 2.0L / std::numbers::pi_v<long double> : 0.0L;
  const long double half = 0.5L * x;
  const long double t0 =
      std::pow(half, static_cast<long double>(nu + 1)) /
      (std::tgamma(1.5L) * std::tgamma(static_cast<long double>(nu) + 1.5L));
  const long double h2 = half * half;
  return sum_series(
      t0, [&](int k) { return h2 / ((k + 1.5L) * (k + nu + 1.5L)); }, cfg, "struve_l");
}

long double hyp0f1_reg_ld(long double b, long double z, const SeriesConfig& cfg) {
  cfg.validate();
  if (!(b > 0.0L)) throw std::domain_error("hyp0f1_reg: b must be positive");
  check_arg(static_cast<double>(z), "hyp0f1_reg");
  const long double t0 = 1.0L / std::tgamma(b);
  if (z == 0.0L) return t0;
  return sum_series(
      t0, [&](int k) { return z / ((k + 1.0L) * (b + k)); }, cfg, "hyp0f1_reg");
}

}  // namespace detail

double bessel_i(int nu, double x, const SeriesConfig& cfg) {
  return static_cast<double>(detail::bessel_i_ld(nu, x, cfg));
}

double struve_l(int nu, double x, const SeriesConfig& cfg) {
  return static_cast<double>(detail::struve_l_ld(nu, x, cfg));
}

double hyp0f1_reg(double b, double z, const SeriesConfig& cfg) {
  return static_cast<double>(detail::hyp0f1_reg_ld(b, z, cfg));
}

double elliptic_k_complement(double m1) {
  if (!(m1 > 0.0) || m1 > 1.0) {
    throw std::domain_error("elliptic_k: complementary parameter must lie in (0, 1]");
  }
  double a = 1.0;
  double g = std::sqrt(m1);
  for (int i = 0; i < 64 && std::fabs(a - g) > 1e-16 * a; ++i) {
    const double an = 0.5 * (a + g);
    g = std::sqrt(a * g);
    a = an;
  }
  return std::numbers::pi / (a + g);
}

double elliptic_k(double m) {
  if (!(m >= 0.0) || m >= 1.0) {
    throw std::domain_error("elliptic_k: parameter must lie in [0, 1), got " + std::to_string(m));
  }
  return elliptic_k_complement(1.0 - m);
}

SeriesConfig full_precision(const SeriesConfig& cfg) {
  SeriesConfig out = cfg;
  out.tol = std::min(cfg.tol, static_cast<double>(std::numeric_limits<long double>::epsilon()));
  out.max_terms = std::max(cfg.max_terms, 400);
  return out;
}

double struve_bessel_gap(double x, const SeriesConfig& cfg) {
  // Both series run to long-double precision: the difference keeps only the
  // digits beyond the cancelled leading part.
  const SeriesConfig full = full_precision(cfg);
  const long double l = detail::struve_l_ld(-1, x, full);
  const long double i = detail::bessel_i_ld(1, x, full);
  const long double gap = l - i;
  const long double err = 8.0L * std::numeric_limits<long double>::epsilon() * std::fabs(l);
  if (!(std::fabs(gap) > 1e6L * err)) {
    throw std::domain_error("struve_bessel_gap: cancellation leaves too few digits at x = " +
                            std::to_string(x));
  }
  return static_cast<double>(gap);
}

}  // namespace so3lap
