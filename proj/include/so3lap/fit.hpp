// NLL gradients, finite-difference checks and first-order fitting.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "so3lap/dist.hpp"
#include "so3lap/mixture.hpp"
#include "so3lap/norm_table.hpp"

namespace so3lap {

/// Where the grid sum for F is evaluated.
///
/// Parameter: cᵢ = tr(S) − tr(AᵀRᵢ) on the grid as given. Exact gradient of
/// that sum, but the sum itself wobbles as UVᵀ moves relative to the cells.
///
/// Canonical: cᵢ = Σⱼ sⱼ(1 − Rᵢ,ⱼⱼ), i.e. the same grid evaluated for
/// diag(S). F then depends on S alone, as the exact normalizer does, and its
/// gradient is U·diag(∂F/∂s)·Vᵀ.
enum class NormFrame { Parameter, Canonical };

struct NormGrad {
  double f = 0.0;      ///< F (rotation Laplace) or log F (matrix Fisher)
  Mat3 dlog_f;         ///< ∂ log F / ∂A
};

NormGrad rl_norm_grad(const RotationLaplace& d, const So3Grid& grid,
                      NormFrame frame = NormFrame::Parameter);
/// Uses the table's interpolated ∂F/∂s; accuracy is limited by the knot
/// spacing.
NormGrad rl_norm_grad_table(const RotationLaplace& d, const NormTable& table);
/// `f` holds log F.
NormGrad mf_log_norm_grad(const MatrixFisher& d, const So3Grid& grid,
                          NormFrame frame = NormFrame::Parameter);

struct DataTerm {
  double value = 0.0;  ///< √c + ½ log c
  Mat3 grad = Mat3::Zero();
  bool clip_active = false;  ///< grad is then the zero subgradient
};
DataTerm rl_data_term(const RotationLaplace& d, const Rotation& r);

struct NllGrad {
  double loss = 0.0;
  Mat3 grad = Mat3::Zero();
  bool clip_active = false;
};

/// −log p(R; A) for the rotation Laplace and its gradient in A.
NllGrad rl_nll_grad(const Mat3& a, const Rotation& r, const So3Grid& grid,
                    double eps_clip = kDefaultEpsClip, NormFrame frame = NormFrame::Parameter);
/// Matrix Fisher counterpart: gradient E_grid[R] − R.
NllGrad mf_nll_grad(const Mat3& a, const Rotation& r, const So3Grid& grid,
                    NormFrame frame = NormFrame::Parameter);

using MatrixLoss = std::function<double(const Mat3&)>;

/// Entrywise central differences. Throws std::invalid_argument unless
/// h ∈ [1e-7, 1e-3].
Mat3 fd_grad(const MatrixLoss& loss, const Mat3& a, double h = 1e-5);

struct GradReport {
  Mat3 analytic = Mat3::Zero();
  Mat3 fd = Mat3::Zero();
  double rel_err = 0.0;  ///< ‖analytic − fd‖_F / max(‖fd‖_F, 1e-12)
  bool clip_active = false;
};
GradReport make_grad_report(const Mat3& analytic, const Mat3& fd, bool clip_active = false);

enum class OptimMethod { GradientDescent, Adam };

struct OptimConfig {
  OptimMethod method = OptimMethod::Adam;
  double lr = 1e-3;
  int iters = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_opt = 1e-8;
  /// 0 means full batch.
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Gradient descent or Adam over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(const OptimConfig& cfg, Eigen::Index dim);
  void step(Eigen::VectorXd& x, const Eigen::VectorXd& grad);

 private:
  OptimConfig cfg_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  int t_ = 0;
};

enum class Family { RotationLaplace, MatrixFisher };

struct FitOptions {
  Family family = Family::RotationLaplace;
  NormFrame frame = NormFrame::Canonical;
  double eps_clip = kDefaultEpsClip;
  /// Mode error in the trace is measured against this; defaults to the
  /// projected sample mean.
  std::optional<Rotation> reference;
  /// Rotation Laplace only: take F and its gradient from the table.
  const NormTable* table = nullptr;
};

struct TraceRow {
  int iter = 0;
  double loss = 0.0;
  double mode_err_deg = 0.0;
  bool clip_active = false;
};

struct FitResult {
  Mat3 a = Mat3::Zero();
  std::vector<TraceRow> trace;
};

/// Fills `out` with the batch for iteration `iter`.
using BatchSource = std::function<void(int iter, std::vector<Rotation>& out)>;

/// Mean NLL over a batch and its gradient.
NllGrad batch_nll_grad(const Mat3& a, std::span<const Rotation> batch, const So3Grid& grid,
                       const FitOptions& opts);

/// Minimizes the mean NLL; each trace row holds the loss before that
/// iteration's update. Throws std::runtime_error if the initial loss is not
/// finite.
FitResult fit_mle(const BatchSource& source, const Mat3& init, const OptimConfig& cfg,
                  const So3Grid& grid, const FitOptions& opts = {});
/// Fixed sample set, full batch or shuffled mini-batches per cfg.batch_size.
FitResult fit_mle(std::span<const Rotation> samples, const Mat3& init, const OptimConfig& cfg,
                  const So3Grid& grid, const FitOptions& opts = {});

/// CSV with header iter,loss,mode_geodesic_error_deg,clip_active.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

/// Unconstrained mixture parameters; weights are softmax(logits).
struct MixtureParams {
  std::vector<Mat3> a;
  std::vector<double> logits;
  double eps_clip = kDefaultEpsClip;

  std::vector<double> weights() const;
  MixtureModel model() const;
};

struct MixtureGrad {
  double loss = 0.0;  ///< L_nll + λ·L_RWTA, averaged over the batch
  std::vector<Mat3> grad_a;
  std::vector<double> grad_logits;
  std::size_t winner = 0;  ///< winner for the last sample
  bool tie = false;        ///< any sample had an argmax tie
};

/// Gradient of mean L_mix over the batch. The RWTA winner is held fixed
/// within a step. For one sample the winner field identifies it exactly.
MixtureGrad mixture_grad(const MixtureParams& p, std::span<const Rotation> batch,
                         const RwtaConfig& cfg, const So3Grid& grid,
                         NormFrame frame = NormFrame::Parameter);

struct MixtureFitResult {
  MixtureParams params;
  std::vector<double> loss_trace;
};

MixtureFitResult fit_mixture(std::span<const Rotation> samples, const MixtureParams& init,
                             const OptimConfig& cfg, const RwtaConfig& rwta,
                             const So3Grid& grid, NormFrame frame = NormFrame::Canonical);

/// Projection of Σ Rᵢ onto SO(3).
Rotation projected_mean(std::span<const Rotation> samples);

}  // namespace so3lap
