#include "so3lap/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "so3lap/rng.hpp"

namespace so3lap {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

Eigen::VectorXd flatten(const Mat3& a) {
  Eigen::VectorXd x(9);
  for (int i = 0; i < 9; ++i) x(i) = a(i / 3, i % 3);
  return x;
}

Mat3 unflatten(const Eigen::VectorXd& x, Eigen::Index offset = 0) {
  Mat3 a;
  for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = x(offset + i);
  return a;
}

Mat3 frame_gradient(const ProperSvd& svd, const Vec3& d_ds) {
  return svd.u.matrix() * d_ds.asDiagonal() * svd.v.matrix().transpose();
}

// Shuffled mini-batches over a fixed sample set; a fresh permutation per pass.
class ShuffledBatches {
 public:
  ShuffledBatches(std::span<const Rotation> samples, std::size_t batch, std::uint64_t seed)
      : samples_(samples), batch_(batch), rng_(seed), order_(samples.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    shuffle();
  }

  void fill(std::vector<Rotation>& out) {
    out.clear();
    for (std::size_t k = 0; k < batch_; ++k) {
      if (pos_ == order_.size()) shuffle();
      out.push_back(samples_[order_[pos_++]]);
    }
  }

 private:
  void shuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) {
      std::swap(order_[i - 1], order_[rng_.below(i)]);
    }
    pos_ = 0;
  }

  std::span<const Rotation> samples_;
  std::size_t batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace

NormGrad rl_norm_grad(const RotationLaplace& d, const So3Grid& grid, NormFrame frame) {
  const double eps = d.eps_clip();
  NormGrad out;
  double f = 0.0;
  if (frame == NormFrame::Canonical) {
    const Vec3& s = d.svd().s;
    Vec3 d_ds = Vec3::Zero();
    for (const auto& r : grid.rotations) {
      const Vec3 deficit(1.0 - r(0, 0), 1.0 - r(1, 1), 1.0 - r(2, 2));
      const double c = s.dot(deficit);
      if (c < eps) {
        f += rl_kernel(eps);
        continue;
      }
      f += rl_kernel(c);
      d_ds += rl_kernel_deriv(c) * deficit;
    }
    out.f = f * grid.cell_weight;
    out.dlog_f = frame_gradient(d.svd(), d_ds * grid.cell_weight) / out.f;
    return out;
  }
  const double tr_s = d.svd().s.sum();
  double sum_gp = 0.0;
  Mat3 sum_gp_r = Mat3::Zero();
  for (const auto& r : grid.rotations) {
    const double c = tr_s - (d.a().array() * r.matrix().array()).sum();
    if (c < eps) {
      f += rl_kernel(eps);
      continue;
    }
    f += rl_kernel(c);
    const double gp = rl_kernel_deriv(c);
    sum_gp += gp;
    sum_gp_r += gp * r.matrix();
  }
  out.f = f * grid.cell_weight;
  out.dlog_f = (d.svd().uvt().matrix() * sum_gp - sum_gp_r) * grid.cell_weight / out.f;
  return out;
}

NormGrad rl_norm_grad_table(const RotationLaplace& d, const NormTable& table) {
  const Vec3& s = d.svd().s;
  const NormQuery q = query_norm_table(table, s(0), s(1), s(2));
  NormGrad out;
  out.f = q.f;
  out.dlog_f = frame_gradient(d.svd(), q.grad) / q.f;
  return out;
}

NormGrad mf_log_norm_grad(const MatrixFisher& d, const So3Grid& grid, NormFrame frame) {
  if (grid.rotations.empty()) throw std::invalid_argument("mf_log_norm_grad: empty grid");
  const bool canonical = frame == NormFrame::Canonical;
  const Vec3& s = d.svd().s;
  std::vector<double> e(grid.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Mat3& r = grid.rotations[i].matrix();
    e[i] = canonical ? s.dot(r.diagonal()) : (d.a().array() * r.array()).sum();
    top = std::max(top, e[i]);
  }
  double sum = 0.0;
  Mat3 mean = Mat3::Zero();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = std::exp(e[i] - top);
    sum += w;
    mean += w * grid.rotations[i].matrix();
  }
  mean /= sum;
  NormGrad out;
  out.f = top + std::log(sum * grid.cell_weight);
  out.dlog_f = canonical ? frame_gradient(d.svd(), mean.diagonal()) : mean;
  return out;
}

DataTerm rl_data_term(const RotationLaplace& d, const Rotation& r) {
  const TraceTerm t = rl_trace_term_detail(d, r);
  DataTerm out;
  const double c = t.clipped;
  out.value = std::sqrt(c) + 0.5 * std::log(c);
  out.clip_active = t.clip_active;
  if (!t.clip_active) {
    const double scale = 0.5 / std::sqrt(c) + 0.5 / c;
    out.grad = scale * (d.svd().uvt().matrix() - r.matrix());
  }
  return out;
}

NllGrad rl_nll_grad(const Mat3& a, const Rotation& r, const So3Grid& grid, double eps_clip,
                    NormFrame frame) {
  const RotationLaplace d(a, eps_clip);
  const NormGrad ng = rl_norm_grad(d, grid, frame);
  const DataTerm dt = rl_data_term(d, r);
  return {std::log(ng.f) + dt.value, ng.dlog_f + dt.grad, dt.clip_active};
}

NllGrad mf_nll_grad(const Mat3& a, const Rotation& r, const So3Grid& grid, NormFrame frame) {
  const MatrixFisher d(a);
  const NormGrad ng = mf_log_norm_grad(d, grid, frame);
  return {-mf_log_pdf(d, r, ng.f), ng.dlog_f - r.matrix(), false};
}

Mat3 fd_grad(const MatrixLoss& loss, const Mat3& a, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw std::invalid_argument("fd_grad: h must lie in [1e-7, 1e-3]");
  Mat3 g;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Mat3 plus = a;
      Mat3 minus = a;
      plus(i, j) += h;
      minus(i, j) -= h;
      g(i, j) = (loss(plus) - loss(minus)) / (2.0 * h);
    }
  }
  return g;
}

GradReport make_grad_report(const Mat3& analytic, const Mat3& fd, bool clip_active) {
  GradReport r;
  r.analytic = analytic;
  r.fd = fd;
  r.rel_err = (analytic - fd).norm() / std::max(fd.norm(), 1e-12);
  r.clip_active = clip_active;
  return r;
}

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("OptimConfig: lr must be positive");
  if (iters < 1) throw std::invalid_argument("OptimConfig: iters must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("OptimConfig: betas must lie in [0, 1)");
  }
  if (!(eps_opt > 0.0)) throw std::invalid_argument("OptimConfig: eps_opt must be positive");
}

Optimizer::Optimizer(const OptimConfig& cfg, Eigen::Index dim)
    : cfg_(cfg), m_(Eigen::VectorXd::Zero(dim)), v_(Eigen::VectorXd::Zero(dim)) {
  cfg_.validate();
}

void Optimizer::step(Eigen::VectorXd& x, const Eigen::VectorXd& grad) {
  if (cfg_.method == OptimMethod::GradientDescent) {
    x -= cfg_.lr * grad;
    return;
  }
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  x.array() -= cfg_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps_opt);
}

Rotation projected_mean(std::span<const Rotation> samples) {
  if (samples.empty()) throw std::invalid_argument("projected_mean: no samples");
  Mat3 sum = Mat3::Zero();
  for (const auto& r : samples) sum += r.matrix();
  return proper_svd(sum).uvt();
}

NllGrad batch_nll_grad(const Mat3& a, std::span<const Rotation> batch, const So3Grid& grid,
                       const FitOptions& opts) {
  if (batch.empty()) throw std::invalid_argument("batch_nll_grad: empty batch");
  const double n = static_cast<double>(batch.size());
  NllGrad out;
  if (opts.family == Family::MatrixFisher) {
    const MatrixFisher d(a);
    const NormGrad ng = mf_log_norm_grad(d, grid, opts.frame);
    Mat3 mean = Mat3::Zero();
    for (const auto& r : batch) mean += r.matrix();
    mean /= n;
    out.loss = ng.f - (a.array() * mean.array()).sum();
    out.grad = ng.dlog_f - mean;
    return out;
  }
  const RotationLaplace d(a, opts.eps_clip);
  const NormGrad ng = opts.table ? rl_norm_grad_table(d, *opts.table)
                                 : rl_norm_grad(d, grid, opts.frame);
  double data = 0.0;
  Mat3 grad = Mat3::Zero();
  for (const auto& r : batch) {
    const DataTerm dt = rl_data_term(d, r);
    data += dt.value;
    grad += dt.grad;
    out.clip_active = out.clip_active || dt.clip_active;
  }
  out.loss = std::log(ng.f) + data / n;
  out.grad = ng.dlog_f + grad / n;
  return out;
}

FitResult fit_mle(const BatchSource& source, const Mat3& init, const OptimConfig& cfg,
                  const So3Grid& grid, const FitOptions& opts) {
  cfg.validate();
  Optimizer opt(cfg, 9);
  Eigen::VectorXd x = flatten(init);
  std::vector<Rotation> batch;
  std::optional<Rotation> reference = opts.reference;
  FitResult result;
  result.trace.reserve(static_cast<std::size_t>(cfg.iters));
  for (int it = 0; it < cfg.iters; ++it) {
    source(it, batch);
    if (!reference) reference = projected_mean(batch);
    const Mat3 a = unflatten(x);
    const NllGrad g = batch_nll_grad(a, batch, grid, opts);
    if (it == 0 && !std::isfinite(g.loss)) {
      throw std::runtime_error("fit_mle: initial loss is not finite");
    }
    if (!g.grad.allFinite()) throw std::runtime_error("fit_mle: non-finite gradient");
    const double err = geodesic_distance(proper_svd(a).uvt(), *reference) * kRadToDeg;
    result.trace.push_back({it, g.loss, err, g.clip_active});
    Eigen::VectorXd gv = flatten(g.grad);
    opt.step(x, gv);
  }
  result.a = unflatten(x);
  return result;
}

FitResult fit_mle(std::span<const Rotation> samples, const Mat3& init, const OptimConfig& cfg,
                  const So3Grid& grid, const FitOptions& opts) {
  if (samples.empty()) throw std::invalid_argument("fit_mle: no samples");
  FitOptions o = opts;
  if (!o.reference) o.reference = projected_mean(samples);
  if (cfg.batch_size == 0 || cfg.batch_size >= samples.size()) {
    return fit_mle(
        [&](int, std::vector<Rotation>& out) { out.assign(samples.begin(), samples.end()); },
        init, cfg, grid, o);
  }
  ShuffledBatches batches(samples, cfg.batch_size, cfg.seed);
  return fit_mle([&](int, std::vector<Rotation>& out) { batches.fill(out); }, init, cfg, grid,
                 o);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iter,loss,mode_geodesic_error_deg,clip_active\n";
  const auto old = out.precision(12);
  for (const auto& row : trace) {
    out << row.iter << ',' << row.loss << ',' << row.mode_err_deg << ','
        << (row.clip_active ? 1 : 0) << '\n';
  }
  out.precision(old);
}

std::vector<double> MixtureParams::weights() const {
  if (logits.empty()) throw std::invalid_argument("MixtureParams: no logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(logits[i] - top);
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

MixtureModel MixtureParams::model() const {
  if (a.size() != logits.size()) {
    throw std::invalid_argument("MixtureParams: component and logit counts differ");
  }
  std::vector<RotationLaplace> comps;
  comps.reserve(a.size());
  for (const auto& m : a) comps.emplace_back(m, eps_clip);
  auto w = weights();
  // Absorb rounding so the model's sum-to-one check sees an exact partition.
  const double rest = std::accumulate(w.begin() + 1, w.end(), 0.0);
  w.front() = std::max(0.0, 1.0 - rest);
  return MixtureModel(std::move(comps), std::move(w));
}

MixtureGrad mixture_grad(const MixtureParams& p, std::span<const Rotation> batch,
                         const RwtaConfig& cfg, const So3Grid& grid, NormFrame frame) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("mixture_grad: empty batch");
  if (p.a.size() != p.logits.size() || p.a.empty()) {
    throw std::invalid_argument("mixture_grad: component and logit counts differ");
  }
  const std::size_t m = p.a.size();
  const std::vector<double> w = p.weights();
  std::vector<RotationLaplace> comps;
  std::vector<NormGrad> norms;
  for (const auto& a : p.a) {
    comps.emplace_back(a, p.eps_clip);
    norms.push_back(rl_norm_grad(comps.back(), grid, frame));
  }

  MixtureGrad out;
  out.grad_a.assign(m, Mat3::Zero());
  out.grad_logits.assign(m, 0.0);
  std::vector<double> lp(m);
  std::vector<Mat3> dnll(m);
  std::vector<double> resp(m);
  for (const auto& r : batch) {
    for (std::size_t i = 0; i < m; ++i) {
      const DataTerm dt = rl_data_term(comps[i], r);
      lp[i] = -std::log(norms[i].f) - dt.value;
      dnll[i] = norms[i].dlog_f + dt.grad;
    }
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (w[i] > 0.0) top = std::max(top, std::log(w[i]) + lp[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      resp[i] = w[i] > 0.0 ? std::exp(std::log(w[i]) + lp[i] - top) : 0.0;
      sum += resp[i];
    }
    for (auto& v : resp) v /= sum;
    const double nll_mix = -(top + std::log(sum));

    std::size_t winner = 0;
    for (std::size_t i = 1; i < m; ++i) {
      if (lp[i] > lp[winner]) winner = i;
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (i != winner && std::fabs(lp[i] - lp[winner]) <= 1e-12) out.tie = true;
    }
    out.winner = winner;

    double rwta = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double pi = m == 1 ? 1.0
                               : (i == winner ? 1.0 - cfg.epsilon
                                              : cfg.epsilon / static_cast<double>(m - 1));
      rwta += pi * -lp[i];
      out.grad_a[i] += (resp[i] + cfg.lambda * pi) * dnll[i];
      out.grad_logits[i] += w[i] - resp[i];
    }
    out.loss += nll_mix + cfg.lambda * rwta;
  }
  const double n = static_cast<double>(batch.size());
  out.loss /= n;
  for (auto& g : out.grad_a) g /= n;
  for (auto& g : out.grad_logits) g /= n;
  return out;
}

MixtureFitResult fit_mixture(std::span<const Rotation> samples, const MixtureParams& init,
                             const OptimConfig& cfg, const RwtaConfig& rwta, const So3Grid& grid,
                             NormFrame frame) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("fit_mixture: no samples");
  const std::size_t m = init.a.size();
  if (m == 0 || init.logits.size() != m) {
    throw std::invalid_argument("fit_mixture: component and logit counts differ");
  }
  const auto dim = static_cast<Eigen::Index>(10 * m);
  Eigen::VectorXd x(dim);
  for (std::size_t i = 0; i < m; ++i) {
    x.segment(static_cast<Eigen::Index>(9 * i), 9) = flatten(init.a[i]);
    x(static_cast<Eigen::Index>(9 * m + i)) = init.logits[i];
  }
  auto unpack = [&](const Eigen::VectorXd& v) {
    MixtureParams p;
    p.eps_clip = init.eps_clip;
    for (std::size_t i = 0; i < m; ++i) {
      p.a.push_back(unflatten(v, static_cast<Eigen::Index>(9 * i)));
      p.logits.push_back(v(static_cast<Eigen::Index>(9 * m + i)));
    }
    return p;
  };

  const bool full = cfg.batch_size == 0 || cfg.batch_size >= samples.size();
  ShuffledBatches batches(samples, full ? samples.size() : cfg.batch_size, cfg.seed);
  std::vector<Rotation> batch;
  Optimizer opt(cfg, dim);
  MixtureFitResult result;
  for (int it = 0; it < cfg.iters; ++it) {
    if (full) {
      batch.assign(samples.begin(), samples.end());
    } else {
      batches.fill(batch);
    }
    const MixtureGrad g = mixture_grad(unpack(x), batch, rwta, grid, frame);
    if (it == 0 && !std::isfinite(g.loss)) {
      throw std::runtime_error("fit_mixture: initial loss is not finite");
    }
    result.loss_trace.push_back(g.loss);
    Eigen::VectorXd gv(dim);
    for (std::size_t i = 0; i < m; ++i) {
      gv.segment(static_cast<Eigen::Index>(9 * i), 9) = flatten(g.grad_a[i]);
      gv(static_cast<Eigen::Index>(9 * m + i)) = g.grad_logits[i];
    }
    if (!gv.allFinite()) throw std::runtime_error("fit_mixture: non-finite gradient");
    opt.step(x, gv);
  }
  result.params = unpack(x);
  return result;
}

}  // namespace so3lap
