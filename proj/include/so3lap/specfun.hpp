// Ascending-series special functions for the analytic normalization factor.
//
// Arguments here stay small (2√s ≲ 40 for every use in the library), so no
// asymptotic expansions are provided. Series are summed in long double and
// the double entry points round the result.
#pragma once

namespace so3lap {

struct SeriesConfig {
  int max_terms = 200;
  double tol = 1e-14;

  /// Throws std::invalid_argument unless max_terms >= 10 and tol > 0.
  void validate() const;
};

/// Modified Bessel function of the first kind, I_ν(x), for ν ∈ {0, 1} and
/// x ∈ [0, 700]. Throws std::domain_error outside that range and
/// std::runtime_error if the series has not converged within max_terms.
double bessel_i(int nu, double x, const SeriesConfig& cfg = {});

/// Modified Struve function L_ν(x) for ν ∈ {−2, …, 2}, x ≥ 0 (x > 0 for
/// ν = −2, where the leading term is −2/(πx)).
double struve_l(int nu, double x, const SeriesConfig& cfg = {});

/// Regularized ₀F̃₁(; b; z) = Σ z^k / (k! Γ(b + k)), b > 0, 0 ≤ z ≤ 700.
double hyp0f1_reg(double b, double z, const SeriesConfig& cfg = {});

/// Complete elliptic integral of the first kind in the parameter convention,
/// K(m) = ∫₀^{π/2} dθ / √(1 − m sin²θ), 0 ≤ m < 1, by the AGM.
double elliptic_k(double m);
/// K expressed through the complementary parameter m₁ = 1 − m ∈ (0, 1]; keeps
/// full precision as m → 1.
double elliptic_k_complement(double m1);

/// L₋₁(x) − I₁(x). Both terms grow like eˣ while the difference decays, so the
/// subtraction is done in long double; throws std::domain_error when the
/// estimated relative error of the result exceeds 1e-6.
double struve_bessel_gap(double x, const SeriesConfig& cfg = {});

/// cfg with tol tightened to long-double epsilon and at least 400 terms.
SeriesConfig full_precision(const SeriesConfig& cfg = {});

namespace detail {
long double bessel_i_ld(int nu, long double x, const SeriesConfig& cfg);
long double struve_l_ld(int nu, long double x, const SeriesConfig& cfg);
long double hyp0f1_reg_ld(long double b, long double z, const SeriesConfig& cfg);
}  // namespace detail

}  // namespace so3lap
