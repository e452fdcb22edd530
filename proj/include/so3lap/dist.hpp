// Rotation Laplace, quaternion Laplace and matrix Fisher distributions.
//
// Densities are with respect to the Haar measure normalized to ∫dR = 1 (and
// the standard surface measure on S³ for the quaternion form). The rotation
// Laplace density is
//
//   p(R; A) = g(c) / F(A),   g(c) = exp(−√c) / √c,   c = tr(S − AᵀR),
//
// with c floored at eps_clip so the singular point at the mode stays finite.
#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "so3lap/grid.hpp"
#include "so3lap/so3.hpp"

namespace so3lap {

inline constexpr double kDefaultEpsClip = 1e-8;
inline constexpr int kDefaultNormLevel = 3;
/// Absolute threshold on singular-value sums when classifying the mode.
inline constexpr double kModeTol = 1e-9;

/// g(c) = e^{−√c}/√c and its derivative.
double rl_kernel(double c);
double rl_kernel_deriv(double c);

class RotationLaplace {
 public:
  /// Throws std::invalid_argument for non-finite A or eps_clip <= 0.
  explicit RotationLaplace(const Mat3& a, double eps_clip = kDefaultEpsClip);

  const Mat3& a() const { return a_; }
  const ProperSvd& svd() const { return svd_; }
  double eps_clip() const { return eps_clip_; }

 private:
  Mat3 a_;
  ProperSvd svd_;
  double eps_clip_;
};

struct TraceTerm {
  double raw = 0.0;      ///< tr(S) − tr(AᵀR) before clipping
  double clipped = 0.0;  ///< max(eps_clip, raw)
  bool clip_active = false;
};

/// Throws std::runtime_error when raw < −1e-6·max(1, s1); mathematically
/// raw ≥ 0, so this signals an inconsistent decomposition.
TraceTerm rl_trace_term_detail(const RotationLaplace& d, const Rotation& r);
double rl_trace_term(const RotationLaplace& d, const Rotation& r);

/// −log f − √c − ½ log c. Throws std::invalid_argument unless f > 0.
double rl_log_pdf(const RotationLaplace& d, const Rotation& r, double f);

/// Σᵢ g(cᵢ)·ΔR over the grid.
double rl_norm_grid(const RotationLaplace& d, const So3Grid& grid);

/// Closed form for A with s1 = s2 = s3 = s: (L₋₁(2√s) − I₁(2√s))/√s.
/// Throws std::domain_error for s <= 0 and, from s ≈ 146 on, when the
/// cancellation leaves fewer than six digits.
double rl_norm_isotropic(double s);
/// dF/ds of the isotropic closed form.
double rl_norm_isotropic_deriv(double s);

/// One-dimensional integral form of F for distinct t1 < t2 < t3, where
/// t1 = 2(s2+s3), t2 = 2(s1+s3), t3 = 2(s1+s2). Both pieces have a
/// logarithmic endpoint singularity at t2; the elliptic parameter stays in
/// [0, 1). Throws std::invalid_argument when the sums are not distinct.
double rl_norm_integral(double s1, double s2, double s3);

/// Member of a non-unique mode set: U·γ(q)·Vᵀ with q restricted to
/// (w, x, 0, 0) for one free parameter or (w, x, y, 0) for two.
struct ModeFamily {
  int dof = 1;
  Rotation u;
  Rotation v;

  /// Zeroes the components that must vanish, renormalizes, and maps.
  Rotation member(const UnitQuaternion& q) const;
};
struct UniqueMode {
  Rotation r;
};
struct IllDefined {};
using ModeResult = std::variant<UniqueMode, ModeFamily, IllDefined>;

/// Classifies by s2+s3, s1+s3, s1+s2 against kModeTol.
ModeResult rl_mode(const RotationLaplace& d);

/// UVᵀ; throws std::domain_error unless s2 + s3 > kModeTol.
Rotation rl_chordal_mean(const RotationLaplace& d);

/// 4·V·diag(1/(s2+s3), 1/(s1+s3), 1/(s1+s2))·Vᵀ. Throws std::domain_error
/// unless s2 + s3 > kModeTol.
Mat3 rl_tangent_cov(const RotationLaplace& d);

/// E[R′] for A = U·(s·I)·Vᵀ, a multiple of the identity.
Mat3 rl_mean_isotropic(double s);

/// −Σ pᵢ log pᵢ ΔR with F evaluated on the same grid.
double rl_entropy(const RotationLaplace& d, const So3Grid& grid);

/// Draws a cell with probability pᵢΔR/Σ, then perturbs it by a rotation
/// uniform in the tangent ball whose radius is the grid's covering radius.
std::vector<Rotation> rl_sample(const RotationLaplace& d, const So3Grid& grid, std::size_t n,
                                std::uint64_t seed);

class MatrixFisher {
 public:
  explicit MatrixFisher(const Mat3& a);

  const Mat3& a() const { return a_; }
  const ProperSvd& svd() const { return svd_; }

 private:
  Mat3 a_;
  ProperSvd svd_;
};

/// tr(AᵀR) − log F. F itself overflows for concentrated A, so callers pass
/// log F.
double mf_log_pdf(const MatrixFisher& d, const Rotation& r, double log_f);
/// log Σᵢ exp(tr(AᵀRᵢ))·ΔR, shifted by the maximum exponent.
double mf_log_norm_grid(const MatrixFisher& d, const So3Grid& grid);
double mf_norm_grid(const MatrixFisher& d, const So3Grid& grid);
Rotation mf_mode(const MatrixFisher& d);

/// Density ∝ exp(−√c)/√c on S³ with c = −qᵀMZMᵀq, Z = diag(0, z1, z2, z3).
class QuaternionLaplace {
 public:
  /// Throws std::invalid_argument unless ‖MᵀM − I‖ ≤ 1e-9 and
  /// 0 ≥ z1 ≥ z2 ≥ z3.
  QuaternionLaplace(const Mat4& m, const Vec3& z, double eps_clip = kDefaultEpsClip);

  const Mat4& m() const { return m_; }
  const Vec3& z() const { return z_; }
  double eps_clip() const { return eps_clip_; }

  /// Unclipped −qᵀMZMᵀq.
  double quadratic_form(const UnitQuaternion& q) const;

 private:
  Mat4 m_;
  Vec3 z_;
  double eps_clip_;
};

double ql_log_pdf(const QuaternionLaplace& d, const UnitQuaternion& q, double f);
/// Σᵢ g(cᵢ)·Δq over the half-sphere grid; approximates the integral over S³.
double ql_norm_grid(const QuaternionLaplace& d, const S3Grid& grid);

/// Quaternion form of a rotation Laplace distribution: M = L(q_U)·R(q_V)ᵀ and
/// Z = diag(0, −2(s2+s3), −2(s1+s3), −2(s1+s2)).
QuaternionLaplace rl_to_ql(const RotationLaplace& d);

}  // namespace so3lap
