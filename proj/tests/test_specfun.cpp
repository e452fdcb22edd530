#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "so3lap/specfun.hpp"

using namespace so3lap;
using boost::multiprecision::cpp_dec_float_50;
using boost::multiprecision::cpp_rational;
using std::numbers::pi;

namespace {

// Σ_{k<50} 1/(k!(k+1)!) in exact rationals: I₁(2).
double bessel_i1_at_2_rational() {
  cpp_rational sum = 0;
  boost::multiprecision::cpp_int fk = 1;
  for (int k = 0; k < 50; ++k) {
    if (k > 0) fk *= k;
    sum += cpp_rational(1, fk * fk * (k + 1));
  }
  return static_cast<double>(sum);
}

cpp_dec_float_50 struve_oracle(int nu, double x) {
  using boost::math::tgamma;
  const cpp_dec_float_50 h = cpp_dec_float_50(x) / 2;
  cpp_dec_float_50 sum = 0;
  for (int k = 0; k < 80; ++k) {
    sum += pow(h, 2 * k + nu + 1) /
           (tgamma(cpp_dec_float_50(k) + cpp_dec_float_50(1.5)) *
            tgamma(cpp_dec_float_50(k + nu) + cpp_dec_float_50(1.5)));
  }
  return sum;
}

double hyp0f1_oracle(int b, double z) {
  cpp_dec_float_50 sum = 0;
  cpp_dec_float_50 term = 1 / boost::math::tgamma(cpp_dec_float_50(b));
  for (int k = 0; k < 80; ++k) {
    sum += term;
    term *= cpp_dec_float_50(z) / ((k + 1) * cpp_dec_float_50(b + k));
  }
  return static_cast<double>(sum);
}

double k_quadrature(double m) {
  auto f = [m](double t) { return 1.0 / std::sqrt(1.0 - m * std::sin(t) * std::sin(t)); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, pi / 2, 15, 1e-14);
}

}  // namespace

TEST_CASE("bessel I") {
  CHECK(bessel_i(1, 0.0) == 0.0);
  CHECK(bessel_i(0, 0.0) == 1.0);
  CHECK(bessel_i(1, 2.0) == doctest::Approx(bessel_i1_at_2_rational()).epsilon(1e-14));
  for (double x : {0.1, 1.0, 7.5, 20.0, 50.0}) {
    CHECK(bessel_i(0, x) == doctest::Approx(boost::math::cyl_bessel_i(0, x)).epsilon(1e-10));
    CHECK(bessel_i(1, x) == doctest::Approx(boost::math::cyl_bessel_i(1, x)).epsilon(1e-10));
  }
  // I₀′ = I₁
  for (double x : {0.5, 3.0, 10.0}) {
    const double h = 1e-5;
    const double d = (bessel_i(0, x + h) - bessel_i(0, x - h)) / (2 * h);
    CHECK(d == doctest::Approx(bessel_i(1, x)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(bessel_i(1, -1.0), std::domain_error);
  CHECK_THROWS_AS(bessel_i(1, 701.0), std::domain_error);
  CHECK_THROWS_AS(bessel_i(2, 1.0), std::invalid_argument);
}

TEST_CASE("struve L") {
  CHECK(struve_l(0, 0.0) == 0.0);
  CHECK(struve_l(-1, 0.0) == doctest::Approx(2.0 / pi).epsilon(1e-15));
  for (int nu = -2; nu <= 2; ++nu) {
    for (double x : {0.3, 2.0, 6.0, 20.0}) {
      const double expected = static_cast<double>(struve_oracle(nu, x));
      CHECK(struve_l(nu, x) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(struve_l(3, 1.0), std::invalid_argument);
}

TEST_CASE("struve recurrence") {
  for (int a : {-2, -1, 0}) {
    for (double b : {0.7, 3.0, 9.0}) {
      const double extra =
          std::pow(2.0, -a - 1) * std::pow(b, a + 1) / (std::sqrt(pi) * std::tgamma(a + 2.5));
      const double lhs = struve_l(a, b);
      const double rhs = 2.0 * (a + 1) / b * struve_l(a + 1, b) + struve_l(a + 2, b) + extra;
      CHECK(std::fabs(lhs - rhs) <= 1e-9 * std::max(1.0, std::fabs(lhs)));
    }
  }
}

TEST_CASE("elliptic K") {
  CHECK(elliptic_k(0.0) == doctest::Approx(pi / 2).epsilon(1e-15));
  CHECK(elliptic_k(0.5) == doctest::Approx(k_quadrature(0.5)).epsilon(1e-12));
  for (int i = 1; i <= 9; ++i) {
    const double m = 0.1 * i;
    CHECK(std::fabs(elliptic_k(m) - k_quadrature(m)) <= 1e-10);
    CHECK(elliptic_k_complement(1.0 - m) == doctest::Approx(elliptic_k(m)).epsilon(1e-12));
  }
  // Near m = 1 the complementary form keeps its precision.
  CHECK(elliptic_k_complement(1e-12) ==
        doctest::Approx(0.5 * std::log(16.0 / 1e-12)).epsilon(1e-10));
  CHECK_THROWS_AS(elliptic_k(1.0), std::domain_error);
  CHECK_THROWS_AS(elliptic_k(-0.1), std::domain_error);
}

TEST_CASE("regularized 0F1") {
  CHECK(hyp0f1_reg(3.0, 0.0) == 0.5);
  CHECK(hyp0f1_reg(4.0, 2.0) == doctest::Approx(hyp0f1_oracle(4, 2.0)).epsilon(1e-14));
  for (double a : {1.0, 3.0, 5.5}) {
    for (double b : {0.2, 1.7, 12.0}) {
      const double lhs = hyp0f1_reg(a, b);
      const double rhs = a * hyp0f1_reg(a + 1, b) + b * hyp0f1_reg(a + 2, b);
      CHECK(std::fabs(lhs - rhs) <= 1e-10 * std::max(1.0, lhs));
    }
  }
}

TEST_CASE("monotone on spot grids") {
  double prev[4] = {-1, -1, -1, -1};
  for (int i = 1; i <= 40; ++i) {
    const double x = 0.5 * i;
    const double cur[4] = {bessel_i(0, x), bessel_i(1, x), struve_l(0, x), hyp0f1_reg(3.0, x)};
    for (int k = 0; k < 4; ++k) {
      CHECK(cur[k] > prev[k]);
      prev[k] = cur[k];
    }
  }
  double k_prev = 0.0;
  for (int i = 0; i < 99; ++i) {
    const double k = elliptic_k(0.01 * i);
    CHECK(k > k_prev);
    k_prev = k;
  }
}

TEST_CASE("struve-bessel gap") {
  for (double x : {0.5, 2.0, 10.0}) {
    CHECK(struve_bessel_gap(x) ==
          doctest::Approx(static_cast<double>(struve_oracle(-1, x)) -
                          boost::math::cyl_bessel_i(1, x))
              .epsilon(1e-9));
  }
}

TEST_CASE("series config validation") {
  SeriesConfig bad;
  bad.max_terms = 5;
  CHECK_THROWS_AS(bessel_i(0, 1.0, bad), std::invalid_argument);
  SeriesConfig tiny;
  tiny.max_terms = 10;
  CHECK_THROWS_AS(bessel_i(0, 600.0, tiny), std::runtime_error);
}
