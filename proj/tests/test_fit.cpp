#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "so3lap/fit.hpp"
#include "so3lap/rng.hpp"

using namespace so3lap;

namespace {

const So3Grid& grid() {
  static const So3Grid g = build_so3_grid(2);
  return g;
}

Mat3 random_a(Rng& rng) {
  Vec3 s(1 + 15 * rng.uniform(), 1 + 10 * rng.uniform(), 0.5 + 5 * rng.uniform());
  std::sort(s.data(), s.data() + 3, std::greater<>());
  return random_rotation(rng).matrix() * s.asDiagonal() * random_rotation(rng).matrix().transpose();
}

// Keeps R at least 10° from the mode so the clip never engages under FD steps.
Rotation away_from_mode(Rng& rng, const Mat3& a) {
  const Rotation mode = proper_svd(a).uvt();
  for (;;) {
    const Rotation r = random_rotation(rng);
    if (geodesic_distance(r, mode) > 0.17) return r;
  }
}

double rel_err(const Mat3& a, const Mat3& b) { return (a - b).norm() / std::max(b.norm(), 1e-12); }

}  // namespace

TEST_CASE("finite differences") {
  Rng rng(1);
  Mat3 a;
  Mat3 b;
  for (int i = 0; i < 9; ++i) {
    a(i / 3, i % 3) = rng.normal();
    b(i / 3, i % 3) = rng.normal();
  }
  const Mat3 g = fd_grad([](const Mat3& x) { return 0.5 * x.squaredNorm(); }, a);
  CHECK((g - a).cwiseAbs().maxCoeff() <= 1e-8);
  const Mat3 l = fd_grad([&](const Mat3& x) { return (b.transpose() * x).trace(); }, a);
  CHECK((l - b).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK_THROWS_AS(fd_grad([](const Mat3&) { return 0.0; }, a, 1e-2), std::invalid_argument);
  CHECK_THROWS_AS(fd_grad([](const Mat3&) { return 0.0; }, a, 1e-9), std::invalid_argument);
}

TEST_CASE("rotation Laplace NLL gradient matches finite differences") {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Mat3 a = random_a(rng);
    const Rotation r = away_from_mode(rng, a);
    for (NormFrame frame : {NormFrame::Parameter, NormFrame::Canonical}) {
      const NllGrad g = rl_nll_grad(a, r, grid(), kDefaultEpsClip, frame);
      const Mat3 fd = fd_grad(
          [&](const Mat3& x) { return rl_nll_grad(x, r, grid(), kDefaultEpsClip, frame).loss; }, a);
      const GradReport rep = make_grad_report(g.grad, fd, g.clip_active);
      CHECK_FALSE(rep.clip_active);
      CHECK(rep.rel_err <= 1e-3);
    }
  }
}

TEST_CASE("data term follows the square-root slice") {
  const RotationLaplace d(5.0 * Mat3::Identity());
  const Rotation r = exp_map(Vec3(0.3, 0, 0));
  const DataTerm dt = rl_data_term(d, r);
  const Mat3 sqrt_c = fd_grad(
      [&](const Mat3& x) { return std::sqrt(rl_trace_term(RotationLaplace(x), r)); }, d.a());
  const double cosine = (dt.grad.array() * sqrt_c.array()).sum() / (dt.grad.norm() * sqrt_c.norm());
  CHECK(cosine == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("clipped data term contributes no gradient") {
  Rng rng(3);
  const Mat3 a = random_a(rng);
  const Rotation mode = proper_svd(a).uvt();
  const NllGrad g = rl_nll_grad(a, mode, grid());
  CHECK(g.clip_active);
  CHECK((g.grad - rl_norm_grad(RotationLaplace(a), grid()).dlog_f).norm() == 0.0);
}

TEST_CASE("matrix Fisher NLL gradient") {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const Mat3 a = random_a(rng);
    const Rotation r = random_rotation(rng);
    const NllGrad g = mf_nll_grad(a, r, grid());
    const Mat3 fd = fd_grad([&](const Mat3& x) { return mf_nll_grad(x, r, grid()).loss; }, a);
    CHECK(rel_err(g.grad, fd) <= 1e-3);
  }

  const Rotation r = random_rotation(rng);
  const NllGrad at_zero = mf_nll_grad(Mat3::Zero(), r, grid());
  const double tol = 3.0 / std::sqrt(static_cast<double>(grid().size()));
  CHECK((at_zero.grad + r.matrix()).cwiseAbs().maxCoeff() <= tol);

  const Mat3 a = random_a(rng);
  const Rotation q = random_rotation(rng);
  const Mat3 base = mf_nll_grad(a, r, grid(), NormFrame::Canonical).grad;
  const Mat3 moved = mf_nll_grad(q.matrix() * a, q * r, grid(), NormFrame::Canonical).grad;
  CHECK((moved - q.matrix() * base).norm() <= 1e-9 * std::max(1.0, base.norm()));
}

TEST_CASE("mixture gradient") {
  Rng rng(5);
  const RwtaConfig cfg;

  MixtureParams one;
  one.a = {random_a(rng)};
  one.logits = {0.3};
  const Rotation r = away_from_mode(rng, one.a[0]);
  const std::vector<Rotation> batch{r};
  const MixtureGrad g1 = mixture_grad(one, batch, cfg, grid());
  CHECK((g1.grad_a[0] - (1.0 + cfg.lambda) * rl_nll_grad(one.a[0], r, grid()).grad).norm() <
        1e-10);
  CHECK(std::fabs(g1.grad_logits[0]) < 1e-15);

  MixtureParams three;
  for (int k = 0; k < 3; ++k) {
    three.a.push_back(random_a(rng));
    three.logits.push_back(rng.normal());
  }
  const Rotation x = random_rotation(rng);
  const std::vector<Rotation> xb{x};
  const MixtureGrad g = mixture_grad(three, xb, cfg, grid());
  REQUIRE_FALSE(g.tie);
  auto loss = [&](const MixtureParams& p) { return mixture_grad(p, xb, cfg, grid()).loss; };
  for (std::size_t k = 0; k < 3; ++k) {
    const Mat3 fd = fd_grad(
        [&](const Mat3& ak) {
          MixtureParams p = three;
          p.a[k] = ak;
          return loss(p);
        },
        three.a[k]);
    CHECK(rel_err(g.grad_a[k], fd) <= 1e-3);
    const double h = 1e-5;
    MixtureParams up = three;
    MixtureParams down = three;
    up.logits[k] += h;
    down.logits[k] -= h;
    CHECK(g.grad_logits[k] == doctest::Approx((loss(up) - loss(down)) / (2 * h)).epsilon(1e-5));
  }

  // Separated components: a non-winner's gradient is ε/(M−1) of its NLL
  // gradient, up to its small but nonzero posterior responsibility.
  MixtureParams sep;
  for (int k = 0; k < 3; ++k) {
    sep.a.push_back(random_rotation(rng).matrix() * Vec3(40, 35, 30).asDiagonal());
    sep.logits.push_back(0.0);
  }
  const Rotation at0 = proper_svd(sep.a[0]).uvt() * exp_map(Vec3(0.02, 0, 0));
  const std::vector<Rotation> sb{at0};
  const MixtureGrad gs = mixture_grad(sep, sb, cfg, grid());
  CHECK(gs.winner == 0);
  for (std::size_t k = 1; k < 3; ++k) {
    const Mat3 expected = cfg.epsilon / 2.0 * rl_nll_grad(sep.a[k], at0, grid()).grad;
    CHECK(rel_err(gs.grad_a[k], expected) <= 1e-3);
  }
}

TEST_CASE("optimizers") {
  OptimConfig gd;
  gd.method = OptimMethod::GradientDescent;
  gd.lr = 0.1;
  Optimizer sgd(gd, 2);
  Eigen::VectorXd x(2);
  x << 1.0, -2.0;
  sgd.step(x, Eigen::Vector2d(1.0, 1.0));
  CHECK(x(0) == doctest::Approx(0.9));
  CHECK(x(1) == doctest::Approx(-2.1));

  OptimConfig adam;
  adam.lr = 0.05;
  Optimizer opt(adam, 2);
  Eigen::VectorXd y(2);
  y << 3.0, -4.0;
  for (int i = 0; i < 2000; ++i) opt.step(y, 2.0 * y);
  CHECK(y.norm() < 1e-2);

  OptimConfig bad;
  bad.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("fit_mle lowers the loss and writes a trace") {
  Rng rng(6);
  const RotationLaplace truth(random_rotation(rng).matrix() * Vec3(10, 6, 3).asDiagonal());
  const auto samples = rl_sample(truth, grid(), 500, 1);
  OptimConfig cfg;
  cfg.lr = 0.05;
  cfg.iters = 200;
  FitOptions opts;
  opts.reference = truth.svd().uvt();
  const FitResult fit = fit_mle(samples, Mat3::Identity(), cfg, grid(), opts);
  REQUIRE(fit.trace.size() == 200);
  CHECK(fit.trace.back().loss < fit.trace.front().loss);
  CHECK(fit.trace.back().mode_err_deg < 5.0);

  std::ostringstream out;
  write_trace_csv(out, fit.trace);
  CHECK(out.str().rfind("iter,loss,mode_geodesic_error_deg,clip_active\n", 0) == 0);
}

TEST_CASE("table-backed gradient agrees with the grid") {
  NormTableSpec spec;
  spec.axes.fill(AxisSpec{1.0, 20.0, 40, true});
  spec.grid_level = 2;
  const NormTable table = build_norm_table(spec);
  const RotationLaplace d(Vec3(9, 5, 2).asDiagonal());
  const NormGrad t = rl_norm_grad_table(d, table);
  const NormGrad g = rl_norm_grad(d, grid(), NormFrame::Canonical);
  CHECK(t.f == doctest::Approx(g.f).epsilon(0.01));
  CHECK(rel_err(t.dlog_f, g.dlog_f) <= 0.03);
}
