#include "so3lap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "so3lap/rng.hpp"

namespace so3lap {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::vector<double> parse_floats(const std::string& body, std::size_t expected,
                                 const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed number '" + item + "' in '" + spec + "'");
    }
    if (used != item.size() || !std::isfinite(v)) {
      throw std::invalid_argument("malformed number '" + item + "' in '" + spec + "'");
    }
    out.push_back(v);
  }
  if (out.size() != expected) {
    throw std::invalid_argument("expected " + std::to_string(expected) + " values in '" + spec +
                                "'");
  }
  return out;
}

std::pair<std::string, std::string> split_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return {spec, ""};
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

Mat3 mat_from(const std::vector<double>& v) {
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = v[static_cast<std::size_t>(i)];
  return m;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  return 0.5 * (upper + *std::max_element(v.begin(), mid));
}

DiracRun dirac_run(Family family, const Rotation& target, const Mat3& init,
                   const DiracConfig& cfg, const So3Grid& grid) {
  OptimConfig oc;
  oc.method = OptimMethod::GradientDescent;
  oc.lr = cfg.lr;
  oc.iters = cfg.iters;
  oc.seed = cfg.seed;
  FitOptions fo;
  fo.family = family;
  fo.eps_clip = cfg.eps_clip;
  fo.reference = target;
  const std::vector<Rotation> samples{target};
  const FitResult fit = fit_mle(samples, init, oc, grid, fo);

  DiracRun run;
  run.family = family;
  run.trace = fit.trace;
  run.final_err_deg = geodesic_distance(proper_svd(fit.a).uvt(), target) * kRadToDeg;
  run.min_err_deg = run.final_err_deg;
  for (const auto& row : fit.trace) {
    run.min_err_deg = std::min(run.min_err_deg, row.mode_err_deg);
    run.clip_seen = run.clip_seen || row.clip_active;
  }
  run.increases = count_loss_increases(fit.trace);
  run.increases_after_100 = count_loss_increases(fit.trace, 100, 1e-9);
  return run;
}

UniformRun uniform_run(Family family, const UniformConfig& cfg, const So3Grid& grid,
                       const std::vector<Rotation>& test) {
  OptimConfig oc;
  oc.lr = cfg.lr;
  oc.iters = cfg.iters;
  oc.seed = cfg.seed;
  FitOptions fo;
  fo.family = family;
  fo.eps_clip = cfg.eps_clip;
  fo.reference = Rotation::identity();
  Rng rng(cfg.seed + 1);
  const FitResult fit = fit_mle(
      [&](int, std::vector<Rotation>& out) {
        out.clear();
        for (std::size_t k = 0; k < cfg.batch; ++k) out.push_back(random_rotation(rng));
      },
      Mat3::Identity(), oc, grid, fo);

  UniformRun run;
  run.family = family;
  run.a = fit.a;
  run.trace = fit.trace;

  std::vector<double> pdf(test.size());
  if (family == Family::RotationLaplace) {
    const RotationLaplace d(fit.a, cfg.eps_clip);
    const double f = rl_norm_grad(d, grid, fo.frame).f;
    for (std::size_t i = 0; i < test.size(); ++i) pdf[i] = std::exp(rl_log_pdf(d, test[i], f));
  } else {
    const MatrixFisher d(fit.a);
    const double log_f = mf_log_norm_grad(d, grid, fo.frame).f;
    for (std::size_t i = 0; i < test.size(); ++i) {
      pdf[i] = std::exp(mf_log_pdf(d, test[i], log_f));
    }
  }
  double nll = 0.0;
  double sum = 0.0;
  double sum2 = 0.0;
  for (double p : pdf) {
    nll -= std::log(p);
    sum += p;
    sum2 += p * p;
  }
  const double n = static_cast<double>(pdf.size());
  run.test_nll = nll / n;
  run.pdf_mean = sum / n;
  run.pdf_std = std::sqrt(std::max(0.0, sum2 / n - run.pdf_mean * run.pdf_mean));

  const auto [lo_it, hi_it] = std::minmax_element(pdf.begin(), pdf.end());
  const double lo = *lo_it;
  const double hi = *hi_it > lo ? *hi_it : lo + 1e-12;
  const auto bins = static_cast<std::size_t>(cfg.bins);
  run.hist_counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b) {
    run.hist_edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
  }
  for (double p : pdf) {
    auto b = static_cast<std::size_t>((p - lo) / (hi - lo) * static_cast<double>(bins));
    ++run.hist_counts[std::min(b, bins - 1)];
  }
  return run;
}

}  // namespace

Mat3 parse_a_spec(const std::string& spec) {
  const auto [kind, body] = split_spec(spec);
  if (kind == "diag") {
    const auto v = parse_floats(body, 3, spec);
    return Vec3(v[0], v[1], v[2]).asDiagonal();
  }
  if (kind == "mat") return mat_from(parse_floats(body, 9, spec));
  if (kind == "rand") {
    std::size_t used = 0;
    unsigned long long seed = 0;
    try {
      seed = std::stoull(body, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (body.empty() || used != body.size()) {
      throw std::invalid_argument("malformed seed in '" + spec + "'");
    }
    Rng rng(seed);
    const Rotation q1 = random_rotation(rng);
    const Rotation q2 = random_rotation(rng);
    Vec3 s(1.0 + 24.0 * rng.uniform(), 1.0 + 24.0 * rng.uniform(), 1.0 + 24.0 * rng.uniform());
    std::sort(s.data(), s.data() + 3, std::greater<>());
    return q1.matrix() * s.asDiagonal() * q2.matrix().transpose();
  }
  throw std::invalid_argument("unknown A spec '" + spec + "' (expected diag:, mat: or rand:)");
}

Rotation parse_rotation_spec(const std::string& spec) {
  const auto [kind, body] = split_spec(spec);
  if (kind == "identity" && body.empty()) return Rotation::identity();
  if (kind == "quat") {
    const auto v = parse_floats(body, 4, spec);
    return quat_to_rot(UnitQuaternion::normalized(v[0], v[1], v[2], v[3]));
  }
  if (kind == "rotvec") {
    const auto v = parse_floats(body, 3, spec);
    return exp_map(Vec3(v[0], v[1], v[2]));
  }
  if (kind == "mat") return Rotation(mat_from(parse_floats(body, 9, spec)));
  throw std::invalid_argument("unknown rotation spec '" + spec +
                              "' (expected identity, quat:, rotvec: or mat:)");
}

std::optional<std::filesystem::path> resolve_grid_cache(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return std::filesystem::path(*flag);
  if (const char* env = std::getenv("SO3LAPLACE_GRID_CACHE"); env && *env) {
    return std::filesystem::path(env);
  }
  return std::nullopt;
}

int count_loss_increases(const std::vector<TraceRow>& trace, int from, double slack) {
  int count = 0;
  for (std::size_t i = static_cast<std::size_t>(std::max(from, 0)) + 1; i < trace.size(); ++i) {
    const double prev = trace[i - 1].loss;
    const double tol = std::max(slack, 1e-12 * std::max(1.0, std::fabs(prev)));
    if (trace[i].loss > prev + tol) ++count;
  }
  return count;
}

DiracReport run_fit_dirac(const DiracConfig& cfg, const So3Grid& grid) {
  Rng rng(cfg.seed);
  DiracReport rep;
  rep.target = random_rotation(rng);
  const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  const Mat3 init =
      (exp_map(axis * cfg.init_offset_deg / kRadToDeg) * rep.target).matrix();
  rep.rl = dirac_run(Family::RotationLaplace, rep.target, init, cfg, grid);
  rep.mf = dirac_run(Family::MatrixFisher, rep.target, init, cfg, grid);
  return rep;
}

UniformReport run_fit_uniform(const UniformConfig& cfg, const So3Grid& grid) {
  if (cfg.batch == 0 || cfg.test_n == 0 || cfg.bins < 1) {
    throw std::invalid_argument("fit-uniform: batch, test size and bins must be positive");
  }
  Rng test_rng(cfg.seed + 1000003);
  std::vector<Rotation> test;
  test.reserve(cfg.test_n);
  for (std::size_t i = 0; i < cfg.test_n; ++i) test.push_back(random_rotation(test_rng));
  UniformReport rep;
  rep.rl = uniform_run(Family::RotationLaplace, cfg, grid, test);
  rep.mf = uniform_run(Family::MatrixFisher, cfg, grid, test);
  return rep;
}

SampleFitReport run_fit_samples(const SampleFitConfig& cfg, const So3Grid& grid) {
  SampleFitReport rep;
  rep.a_true = parse_a_spec(cfg.a_spec);
  const RotationLaplace truth(rep.a_true, cfg.eps_clip);
  rep.s_true = truth.svd().s;
  const auto samples = rl_sample(truth, grid, cfg.n, cfg.seed);

  Rng rng(cfg.seed + 7);
  const Mat3 init = random_rotation(rng).matrix();
  OptimConfig oc;
  oc.lr = cfg.lr;
  oc.iters = cfg.iters;
  oc.seed = cfg.seed;
  FitOptions fo;
  fo.eps_clip = cfg.eps_clip;
  fo.reference = truth.svd().uvt();
  const FitResult fit = fit_mle(samples, init, oc, grid, fo);
  rep.a_fit = fit.a;
  const ProperSvd svd = proper_svd(fit.a);
  rep.s_fit = svd.s;
  rep.mode_err_deg = geodesic_distance(svd.uvt(), truth.svd().uvt()) * kRadToDeg;
  rep.trace = fit.trace;
  return rep;
}

std::vector<WahbaRow> run_wahba(const WahbaConfig& cfg, const So3Grid& grid) {
  if (cfg.points < 3 || cfg.batch == 0 || cfg.test_n == 0 || cfg.eval_every < 1) {
    throw std::invalid_argument("wahba: invalid configuration");
  }
  Rng rng(cfg.seed);
  std::vector<Vec3> cloud;
  for (std::size_t i = 0; i < cfg.points; ++i) {
    cloud.emplace_back(rng.normal(), rng.normal(), rng.normal());
  }

  struct Instance {
    Rotation r;
    Eigen::Matrix<double, 9, 1> b;
    Rotation kabsch;
  };
  auto make_instance = [&](Rng& g) {
    Instance inst;
    inst.r = random_rotation(g);
    std::vector<Vec3> moved;
    Mat3 b = Mat3::Zero();
    for (const auto& p : cloud) {
      const Vec3 q = inst.r * p + cfg.noise * Vec3(g.normal(), g.normal(), g.normal());
      moved.push_back(q);
      b += q * p.transpose();
    }
    b /= static_cast<double>(cloud.size());
    for (int i = 0; i < 9; ++i) inst.b(i) = b(i / 3, i % 3);
    inst.kabsch = wahba_solve(cloud, moved);
    return inst;
  };

  Rng test_rng(cfg.seed + 1);
  std::vector<Instance> test;
  for (std::size_t i = 0; i < cfg.test_n; ++i) test.push_back(make_instance(test_rng));
  std::vector<double> kabsch_err;
  for (const auto& t : test) kabsch_err.push_back(geodesic_distance(t.kabsch, t.r) * kRadToDeg);
  const double kabsch_median = median(kabsch_err);

  // Parameters: 9×9 weight matrix (row-major) followed by a 9-vector bias.
  struct Model {
    Family family;
    Eigen::VectorXd x;
    Optimizer opt;
    Rng rng;
  };
  OptimConfig oc;
  oc.lr = cfg.lr;
  oc.iters = cfg.iters;
  Rng init_rng(cfg.seed + 2);
  Eigen::VectorXd x0(90);
  for (Eigen::Index i = 0; i < 90; ++i) x0(i) = 0.1 * init_rng.normal();
  Model models[2] = {{Family::RotationLaplace, x0, Optimizer(oc, 90), Rng(cfg.seed + 3)},
                     {Family::MatrixFisher, x0, Optimizer(oc, 90), Rng(cfg.seed + 3)}};

  auto predict = [](const Eigen::VectorXd& x, const Eigen::Matrix<double, 9, 1>& b) {
    Mat3 a;
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = x.segment(9 * i, 9).dot(b) + x(81 + i);
    return a;
  };
  auto evaluate = [&](const Model& m, double& med, double& mx) {
    std::vector<double> err;
    for (const auto& t : test) {
      err.push_back(geodesic_distance(proper_svd(predict(m.x, t.b)).uvt(), t.r) * kRadToDeg);
    }
    med = median(err);
    mx = *std::max_element(err.begin(), err.end());
  };

  std::vector<WahbaRow> rows;
  for (int it = 0; it <= cfg.iters; ++it) {
    if (it % cfg.eval_every == 0 || it == cfg.iters) {
      WahbaRow row;
      row.iter = it;
      evaluate(models[0], row.rl_median_deg, row.rl_max_deg);
      evaluate(models[1], row.mf_median_deg, row.mf_max_deg);
      row.kabsch_median_deg = kabsch_median;
      rows.push_back(row);
    }
    if (it == cfg.iters) break;
    for (auto& m : models) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(90);
      for (std::size_t k = 0; k < cfg.batch; ++k) {
        const Instance inst = make_instance(m.rng);
        const Mat3 a = predict(m.x, inst.b);
        const NllGrad g = m.family == Family::RotationLaplace
                              ? rl_nll_grad(a, inst.r, grid, cfg.eps_clip, NormFrame::Canonical)
                              : mf_nll_grad(a, inst.r, grid, NormFrame::Canonical);
        for (int i = 0; i < 9; ++i) {
          const double gi = g.grad(i / 3, i % 3);
          grad.segment(9 * i, 9) += gi * inst.b;
          grad(81 + i) += gi;
        }
      }
      grad /= static_cast<double>(cfg.batch);
      if (!grad.allFinite()) throw std::runtime_error("wahba: non-finite gradient");
      m.opt.step(m.x, grad);
    }
  }
  return rows;
}

MixtureDemoReport run_mixture_demo(const MixtureDemoConfig& cfg, const So3Grid& grid) {
  if (cfg.components < 2) throw std::invalid_argument("mixture-demo: need at least 2 components");
  if (cfg.n < cfg.components) throw std::invalid_argument("mixture-demo: too few samples");
  Rng rng(cfg.seed);
  const Rotation q = random_rotation(rng);
  const Mat3 a0 = q.matrix() * parse_a_spec(cfg.a_spec);
  const Mat3 a1 = a0 * exp_map(Vec3(0.0, 0.0, std::numbers::pi)).matrix();
  const RotationLaplace d0(a0);
  const RotationLaplace d1(a1);

  MixtureDemoReport rep;
  rep.true_modes[0] = d0.svd().uvt();
  rep.true_modes[1] = d1.svd().uvt();

  std::vector<Rotation> samples;
  if (cfg.unimodal) {
    samples = rl_sample(d0, grid, cfg.n, 2 * cfg.seed + 1);
  } else {
    const auto s0 = rl_sample(d0, grid, cfg.n / 2, 2 * cfg.seed + 1);
    const auto s1 = rl_sample(d1, grid, cfg.n - cfg.n / 2, 2 * cfg.seed + 2);
    for (std::size_t i = 0; i < std::max(s0.size(), s1.size()); ++i) {
      if (i < s0.size()) samples.push_back(s0[i]);
      if (i < s1.size()) samples.push_back(s1[i]);
    }
  }

  // Farthest-point seeding from the projected mean.
  std::vector<Rotation> seeds{projected_mean(samples)};
  std::vector<double> dist(samples.size(), std::numeric_limits<double>::infinity());
  while (seeds.size() < cfg.components) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      dist[i] = std::min(dist[i], geodesic_distance(samples[i], seeds.back()));
      if (dist[i] > dist[best]) best = i;
    }
    seeds.push_back(samples[best]);
  }
  MixtureParams init;
  for (const auto& s : seeds) {
    init.a.push_back(cfg.init_scale * s.matrix());
    init.logits.push_back(0.0);
  }

  OptimConfig oc;
  oc.lr = cfg.lr;
  oc.iters = cfg.iters;
  oc.seed = cfg.seed;
  const MixtureFitResult fit = fit_mixture(samples, init, oc, cfg.rwta, grid);
  rep.params = fit.params;
  rep.loss_trace = fit.loss_trace;

  const MixtureModel model = fit.params.model();
  rep.top = top_k_modes(model, model.size());
  auto err = [](const Rotation& a, const Rotation& b) { return geodesic_distance(a, b) * kRadToDeg; };
  const Rotation& t0 = rep.true_modes[0];
  const Rotation& t1 = rep.true_modes[1];
  rep.top1_err_deg = std::min(err(rep.top[0].first, t0), err(rep.top[0].first, t1));
  const double straight = std::max(err(rep.top[0].first, t0), err(rep.top[1].first, t1));
  const double crossed = std::max(err(rep.top[0].first, t1), err(rep.top[1].first, t0));
  rep.top2_max_err_deg = std::min(straight, crossed);
  rep.live_weight = rep.top[0].second + rep.top[1].second;
  for (std::size_t i = 0; i < rep.top.size(); ++i) {
    for (std::size_t j = i + 1; j < rep.top.size(); ++j) {
      rep.mode_spread_deg = std::max(rep.mode_spread_deg, err(rep.top[i].first, rep.top[j].first));
    }
  }
  return rep;
}

}  // namespace so3lap
