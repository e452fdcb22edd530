// so3lap command-line front end.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "so3lap/experiments.hpp"
#include "so3lap/grid.hpp"
#include "so3lap/norm_table.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace so3lap;

namespace {

struct Common {
  int level = 3;
  double eps_clip = kDefaultEpsClip;
  std::optional<double> lr;
  std::optional<int> iters;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<std::string> grid_cache;
};

void add_common(CLI::App* cmd, Common& c, bool optim = true) {
  cmd->add_option("--level", c.level, "grid level (0-5)")->capture_default_str();
  cmd->add_option("--eps-clip", c.eps_clip, "clip floor for tr(S - A^T R)")->capture_default_str();
  if (optim) {
    cmd->add_option("--lr", c.lr, "learning rate");
    cmd->add_option("--iters", c.iters, "iterations");
  }
  cmd->add_option("--seed", c.seed, "PRNG seed")->capture_default_str();
  cmd->add_option("--out", c.out, "output directory (output file for table-gen)");
  cmd->add_option("--grid-cache", c.grid_cache,
                  "grid cache directory (overrides SO3LAPLACE_GRID_CACHE)");
}

void check_level(int level) {
  if (level < 0) throw std::invalid_argument("level must be non-negative");
  if (level > kMaxGridLevel) {
    throw std::invalid_argument("level " + std::to_string(level) + " refused: grids above level " +
                                std::to_string(kMaxGridLevel) + " exceed the memory guard");
  }
}

So3Grid grid_for(const Common& c) {
  check_level(c.level);
  return load_or_build_so3_grid(c.level, resolve_grid_cache(c.grid_cache));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ofstream open_out(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << std::setprecision(10);
  return out;
}

void write_trace(const Common& c, const std::string& name, const std::vector<TraceRow>& trace) {
  if (c.out.empty()) return;
  auto out = open_out(fs::path(c.out) / name);
  write_trace_csv(out, trace);
}

void emit_summary(const Common& c, const std::string& name, const json& summary) {
  std::cout << summary.dump(2) << '\n';
  if (c.out.empty()) return;
  auto out = open_out(fs::path(c.out) / name);
  out << summary.dump(2) << '\n';
}

json mat_json(const Mat3& m) {
  json j = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) j.push_back(m(i, k));
  }
  return j;
}

json quat_json(const Rotation& r) {
  const UnitQuaternion q = rot_to_quat(r).canonical();
  return {q.w, q.x, q.y, q.z};
}

json vec_json(const Vec3& v) { return {v(0), v(1), v(2)}; }

json dirac_json(const DiracRun& r) {
  return {{"final_mode_error_deg", r.final_err_deg},
          {"min_mode_error_deg", r.min_err_deg},
          {"clip_active_seen", r.clip_seen},
          {"loss_increases", r.increases},
          {"loss_increases_after_100", r.increases_after_100},
          {"final_loss", r.trace.empty() ? 0.0 : r.trace.back().loss}};
}

std::string mode_kind(const ModeResult& m) {
  if (std::holds_alternative<UniqueMode>(m)) return "unique";
  if (const auto* f = std::get_if<ModeFamily>(&m)) return "family_dof" + std::to_string(f->dof);
  return "ill_defined";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotation Laplace distribution on SO(3): densities, normalizers and fits"};
  app.require_subcommand(1);

  Common c;

  auto* grid_info = app.add_subcommand("grid-info", "grid size, covering radius and build time");
  add_common(grid_info, c, false);

  auto* table_gen = app.add_subcommand("table-gen", "precompute a normalizer lookup table");
  add_common(table_gen, c, false);
  AxisSpec axis;
  bool linear = false;
  unsigned threads = 0;
  table_gen->add_option("--lo", axis.lo, "smallest knot")->capture_default_str();
  table_gen->add_option("--hi", axis.hi, "largest knot")->capture_default_str();
  table_gen->add_option("--knots", axis.knots, "knots per axis")->capture_default_str();
  table_gen->add_flag("--linear", linear, "linear instead of log knot spacing");
  table_gen->add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* fit_dirac = app.add_subcommand("fit-dirac", "gradient-descent fit to a single rotation");
  add_common(fit_dirac, c);
  DiracConfig dirac;
  fit_dirac->add_option("--init-offset-deg", dirac.init_offset_deg, "initial mode offset")
      ->capture_default_str();

  auto* fit_uniform = app.add_subcommand("fit-uniform", "Adam fit to Haar-uniform batches");
  add_common(fit_uniform, c);
  UniformConfig uniform;
  fit_uniform->add_option("--batch", uniform.batch, "batch size")->capture_default_str();
  fit_uniform->add_option("--test-n", uniform.test_n, "test set size")->capture_default_str();
  fit_uniform->add_option("--bins", uniform.bins, "pdf histogram bins")->capture_default_str();

  auto* fit_samples = app.add_subcommand("fit-samples", "sample from RL(A) and refit");
  add_common(fit_samples, c);
  SampleFitConfig samples;
  fit_samples->add_option("--a", samples.a_spec, "diag:a,b,c | mat:9 floats | rand:seed")
      ->capture_default_str();
  fit_samples->add_option("-n,--n", samples.n, "sample count")->capture_default_str();

  auto* wahba = app.add_subcommand("wahba", "learn a linear map from profile matrices to A (grid level defaults to 2)");
  add_common(wahba, c);
  WahbaConfig wcfg;
  wahba->add_option("--points", wcfg.points, "points in the cloud")->capture_default_str();
  wahba->add_option("--batch", wcfg.batch, "batch size")->capture_default_str();
  wahba->add_option("--noise", wcfg.noise, "observation noise stdev")->capture_default_str();
  wahba->add_option("--test-n", wcfg.test_n, "test instances")->capture_default_str();
  wahba->add_option("--eval-every", wcfg.eval_every, "evaluation interval")->capture_default_str();

  auto* mixture = app.add_subcommand("mixture-demo", "mixture fit on a 2-symmetric target");
  add_common(mixture, c);
  MixtureDemoConfig mcfg;
  mixture->add_option("-n,--n", mcfg.n, "sample count")->capture_default_str();
  mixture->add_option("--components", mcfg.components, "mixture components")
      ->capture_default_str();
  mixture->add_option("--a", mcfg.a_spec, "A spec of the first mode")->capture_default_str();
  mixture->add_option("--init-scale", mcfg.init_scale, "initial singular value")
      ->capture_default_str();
  mixture->add_option("--rwta-eps", mcfg.rwta.epsilon, "RWTA epsilon")->capture_default_str();
  mixture->add_option("--lambda", mcfg.rwta.lambda, "RWTA loss weight")->capture_default_str();
  mixture->add_flag("--unimodal", mcfg.unimodal, "draw all samples from the first mode");

  auto* eval = app.add_subcommand("eval", "density queries for one A");
  add_common(eval, c, false);
  std::string a_spec = "diag:1,1,1";
  std::string r_spec = "identity";
  std::string dump;
  eval->add_option("--a", a_spec, "diag:a,b,c | mat:9 floats | rand:seed")->capture_default_str();
  eval->add_option("--r", r_spec, "identity | quat:w,x,y,z | rotvec:x,y,z | mat:9 floats")
      ->capture_default_str();
  eval->add_option("--dump", dump, "write qw,qx,qy,qz,pdf for every grid cell to this file");

  wahba->callback([&] {
    if (wahba->count("--level") == 0) c.level = 2;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    std::cout << std::setprecision(10);
    const auto t0 = std::chrono::steady_clock::now();

    if (grid_info->parsed()) {
      check_level(c.level);
      const So3Grid grid = grid_for(c);
      const double build = seconds_since(t0);
      const double radius = covering_radius_estimate(grid, 512, c.seed);
      emit_summary(c, "grid_info.json",
                   {{"level", c.level},
                    {"count", grid.size()},
                    {"cell_weight", grid.cell_weight},
                    {"covering_radius_deg", radius * 180.0 / std::numbers::pi},
                    {"build_seconds", build}});
    } else if (table_gen->parsed()) {
      check_level(c.level);
      if (c.out.empty()) throw std::invalid_argument("table-gen needs --out FILE");
      axis.log_spaced = !linear;
      NormTableSpec spec;
      spec.axes = {axis, axis, axis};
      spec.grid_level = c.level;
      spec.eps_clip = c.eps_clip;
      const NormTable table = build_norm_table(spec, threads);
      const fs::path file(c.out);
      if (file.has_parent_path()) fs::create_directories(file.parent_path());
      save_norm_table(table, file);
      std::cout << json{{"file", file.string()},
                        {"entries", table.values.size()},
                        {"grid_level", c.level},
                        {"seconds", seconds_since(t0)}}
                       .dump(2)
                << '\n';
    } else if (fit_dirac->parsed()) {
      dirac.lr = c.lr.value_or(dirac.lr);
      dirac.iters = c.iters.value_or(dirac.iters);
      dirac.eps_clip = c.eps_clip;
      dirac.seed = c.seed;
      const So3Grid grid = grid_for(c);
      const DiracReport rep = run_fit_dirac(dirac, grid);
      write_trace(c, "dirac_rl.csv", rep.rl.trace);
      write_trace(c, "dirac_mf.csv", rep.mf.trace);
      emit_summary(c, "dirac_summary.json",
                   {{"lr", dirac.lr},
                    {"iters", dirac.iters},
                    {"target_quat", quat_json(rep.target)},
                    {"rotation_laplace", dirac_json(rep.rl)},
                    {"matrix_fisher", dirac_json(rep.mf)},
                    {"seconds", seconds_since(t0)}});
    } else if (fit_uniform->parsed()) {
      uniform.lr = c.lr.value_or(uniform.lr);
      uniform.iters = c.iters.value_or(uniform.iters);
      uniform.eps_clip = c.eps_clip;
      uniform.seed = c.seed;
      const So3Grid grid = grid_for(c);
      const UniformReport rep = run_fit_uniform(uniform, grid);
      write_trace(c, "uniform_rl.csv", rep.rl.trace);
      write_trace(c, "uniform_mf.csv", rep.mf.trace);
      if (!c.out.empty()) {
        auto out = open_out(fs::path(c.out) / "uniform_hist.csv");
        out << "family,bin_lo,bin_hi,count\n";
        for (const UniformRun* r : {&rep.rl, &rep.mf}) {
          const char* name = r->family == Family::RotationLaplace ? "rl" : "mf";
          for (std::size_t b = 0; b < r->hist_counts.size(); ++b) {
            out << name << ',' << r->hist_edges[b] << ',' << r->hist_edges[b + 1] << ','
                << r->hist_counts[b] << '\n';
          }
        }
      }
      auto run_json = [](const UniformRun& r) {
        return json{{"test_nll", r.test_nll},
                    {"pdf_mean", r.pdf_mean},
                    {"pdf_std", r.pdf_std},
                    {"a", mat_json(r.a)}};
      };
      emit_summary(c, "uniform_summary.json",
                   {{"rotation_laplace", run_json(rep.rl)},
                    {"matrix_fisher", run_json(rep.mf)},
                    {"seconds", seconds_since(t0)}});
    } else if (fit_samples->parsed()) {
      samples.lr = c.lr.value_or(samples.lr);
      samples.iters = c.iters.value_or(samples.iters);
      samples.eps_clip = c.eps_clip;
      samples.seed = c.seed;
      const So3Grid grid = grid_for(c);
      const SampleFitReport rep = run_fit_samples(samples, grid);
      write_trace(c, "fit_samples.csv", rep.trace);
      emit_summary(c, "fit_samples_summary.json",
                   {{"a_true", mat_json(rep.a_true)},
                    {"a_fit", mat_json(rep.a_fit)},
                    {"s_true", vec_json(rep.s_true)},
                    {"s_fit", vec_json(rep.s_fit)},
                    {"mode_error_deg", rep.mode_err_deg},
                    {"seconds", seconds_since(t0)}});
    } else if (wahba->parsed()) {
      wcfg.lr = c.lr.value_or(wcfg.lr);
      wcfg.iters = c.iters.value_or(wcfg.iters);
      wcfg.eps_clip = c.eps_clip;
      wcfg.seed = c.seed;
      const So3Grid grid = grid_for(c);
      const auto rows = run_wahba(wcfg, grid);
      std::ostringstream csv;
      csv << std::setprecision(10)
          << "iter,rl_median_deg,rl_max_deg,mf_median_deg,mf_max_deg,kabsch_median_deg\n";
      for (const auto& r : rows) {
        csv << r.iter << ',' << r.rl_median_deg << ',' << r.rl_max_deg << ',' << r.mf_median_deg
            << ',' << r.mf_max_deg << ',' << r.kabsch_median_deg << '\n';
      }
      if (c.out.empty()) {
        std::cout << csv.str();
      } else {
        open_out(fs::path(c.out) / "wahba.csv") << csv.str();
        const auto& last = rows.back();
        emit_summary(c, "wahba_summary.json",
                     {{"lr", wcfg.lr},
                      {"iters", wcfg.iters},
                      {"rl_median_deg", last.rl_median_deg},
                      {"mf_median_deg", last.mf_median_deg},
                      {"kabsch_median_deg", last.kabsch_median_deg},
                      {"seconds", seconds_since(t0)}});
      }
    } else if (mixture->parsed()) {
      mcfg.lr = c.lr.value_or(mcfg.lr);
      mcfg.iters = c.iters.value_or(mcfg.iters);
      mcfg.seed = c.seed;
      const So3Grid grid = grid_for(c);
      MixtureDemoReport rep = run_mixture_demo(mcfg, grid);
      rep.params.eps_clip = c.eps_clip;
      json top = json::array();
      for (const auto& [r, w] : rep.top) top.push_back({{"quat", quat_json(r)}, {"weight", w}});
      if (!c.out.empty()) {
        auto out = open_out(fs::path(c.out) / "mixture_loss.csv");
        out << "iter,loss\n";
        for (std::size_t i = 0; i < rep.loss_trace.size(); ++i) {
          out << i << ',' << rep.loss_trace[i] << '\n';
        }
      }
      emit_summary(c, "mixture_report.json",
                   {{"true_modes", {quat_json(rep.true_modes[0]), quat_json(rep.true_modes[1])}},
                    {"top", top},
                    {"top1_error_deg", rep.top1_err_deg},
                    {"top2_max_error_deg", rep.top2_max_err_deg},
                    {"live_weight", rep.live_weight},
                    {"mode_spread_deg", rep.mode_spread_deg},
                    {"mixture", mixture_to_json(rep.params.model())},
                    {"seconds", seconds_since(t0)}});
    } else if (eval->parsed()) {
      const RotationLaplace d(parse_a_spec(a_spec), c.eps_clip);
      const Rotation r = parse_rotation_spec(r_spec);
      const So3Grid grid = grid_for(c);
      const double f = rl_norm_grid(d, grid);
      const double lp = rl_log_pdf(d, r, f);
      const ModeResult mode = rl_mode(d);
      std::cout << std::setprecision(12) << "field,value\n"
                << "log_pdf," << lp << "\npdf," << std::exp(lp) << "\nnorm," << f
                << "\nentropy," << rl_entropy(d, grid) << "\nmode_kind," << mode_kind(mode)
                << '\n';
      const Rotation m = d.svd().uvt();
      const UnitQuaternion q = rot_to_quat(m).canonical();
      std::cout << "mode_qw," << q.w << "\nmode_qx," << q.x << "\nmode_qy," << q.y
                << "\nmode_qz," << q.z << '\n';
      const Vec3& s = d.svd().s;
      const bool cov_ok = s(1) + s(2) > kModeTol;
      const Mat3 cov = cov_ok ? rl_tangent_cov(d) : Mat3::Constant(std::nan(""));
      for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) std::cout << "cov_" << i << k << ',' << cov(i, k) << '\n';
      }
      if (!dump.empty()) {
        auto out = open_out(dump);
        out << std::setprecision(12) << "qw,qx,qy,qz,pdf\n";
        for (const auto& g : grid.rotations) {
          const UnitQuaternion gq = rot_to_quat(g).canonical();
          out << gq.w << ',' << gq.x << ',' << gq.y << ',' << gq.z << ','
              << std::exp(rl_log_pdf(d, g, f)) << '\n';
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "so3lap: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
