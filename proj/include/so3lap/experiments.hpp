// Desk-scale fitting experiments shared by the CLI and the acceptance suite.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "so3lap/fit.hpp"
#include "so3lap/mixture.hpp"

namespace so3lap {

/// "diag:a,b,c" | "mat:<9 comma floats, row-major>" | "rand:<seed>".
/// rand draws Q1·diag(s)·Q2ᵀ with Haar Q1, Q2 and s uniform in [1, 25],
/// sorted descending. Throws std::invalid_argument on malformed input.
Mat3 parse_a_spec(const std::string& spec);

/// "identity" | "quat:w,x,y,z" | "rotvec:x,y,z" | "mat:<9 floats>".
Rotation parse_rotation_spec(const std::string& spec);

/// Cache directory from the flag, else SO3LAPLACE_GRID_CACHE, else none.
std::optional<std::filesystem::path> resolve_grid_cache(const std::optional<std::string>& flag);

/// Loss increases larger than 1e-12·max(1, |loss|) after iteration `from`.
int count_loss_increases(const std::vector<TraceRow>& trace, int from = 0, double slack = 0.0);

struct DiracConfig {
  double lr = 1e-3;
  int iters = 20000;
  double eps_clip = kDefaultEpsClip;
  /// Initial A = exp(offset·axis)·R* with a random axis.
  double init_offset_deg = 30.0;
  std::uint64_t seed = 0;
};

struct DiracRun {
  Family family = Family::RotationLaplace;
  std::vector<TraceRow> trace;
  double final_err_deg = 0.0;
  double min_err_deg = 0.0;
  bool clip_seen = false;
  int increases = 0;
  int increases_after_100 = 0;
};

struct DiracReport {
  Rotation target;
  DiracRun rl;
  DiracRun mf;
};

/// Gradient-descent fit of both families to a single repeated rotation.
DiracReport run_fit_dirac(const DiracConfig& cfg, const So3Grid& grid);

struct UniformConfig {
  int iters = 10000;
  std::size_t batch = 16;
  std::size_t test_n = 100000;
  double lr = 1e-3;
  double eps_clip = kDefaultEpsClip;
  int bins = 50;
  std::uint64_t seed = 0;
};

struct UniformRun {
  Family family = Family::RotationLaplace;
  Mat3 a = Mat3::Zero();
  double test_nll = 0.0;
  double pdf_mean = 0.0;
  double pdf_std = 0.0;
  std::vector<double> hist_edges;  ///< bins + 1 edges
  std::vector<std::size_t> hist_counts;
  std::vector<TraceRow> trace;
};

struct UniformReport {
  UniformRun rl;
  UniformRun mf;
};

/// Adam fit to Haar-uniform batches drawn on the fly, then NLL and a density
/// histogram over a fresh uniform test set.
UniformReport run_fit_uniform(const UniformConfig& cfg, const So3Grid& grid);

struct SampleFitConfig {
  std::string a_spec = "diag:25,5,1";
  std::size_t n = 10000;
  int iters = 5000;
  double lr = 0.05;
  double eps_clip = kDefaultEpsClip;
  std::uint64_t seed = 0;
};

struct SampleFitReport {
  Mat3 a_true = Mat3::Zero();
  Mat3 a_fit = Mat3::Zero();
  Vec3 s_true = Vec3::Zero();
  Vec3 s_fit = Vec3::Zero();
  double mode_err_deg = 0.0;
  std::vector<TraceRow> trace;
};

/// Draws n samples from RL(A) on the grid and refits from a random mode with
/// S = I. The samples depend only on (a_spec, n, seed, grid), not on eps_clip.
SampleFitReport run_fit_samples(const SampleFitConfig& cfg, const So3Grid& grid);

struct WahbaConfig {
  std::size_t points = 100;
  int iters = 10000;
  std::size_t batch = 100;
  double lr = 1e-4;
  double noise = 0.0;
  std::size_t test_n = 200;
  int eval_every = 100;
  double eps_clip = kDefaultEpsClip;
  std::uint64_t seed = 0;
};

struct WahbaRow {
  int iter = 0;
  double rl_median_deg = 0.0;
  double rl_max_deg = 0.0;
  double mf_median_deg = 0.0;
  double mf_max_deg = 0.0;
  double kabsch_median_deg = 0.0;
};

/// Linear map from the flattened profile matrix B to A, trained by NLL for
/// each family; test errors are geodesic distances of UVᵀ to the truth.
std::vector<WahbaRow> run_wahba(const WahbaConfig& cfg, const So3Grid& grid);

struct MixtureDemoConfig {
  std::size_t n = 2000;
  std::size_t components = 4;
  int iters = 500;
  double lr = 0.05;
  double init_scale = 5.0;
  /// Draw all samples from the first mode only.
  bool unimodal = false;
  std::string a_spec = "diag:20,15,10";
  RwtaConfig rwta;
  std::uint64_t seed = 0;
};

struct MixtureDemoReport {
  Rotation true_modes[2];
  MixtureParams params;
  std::vector<std::pair<Rotation, double>> top;  ///< all components, by weight
  double top1_err_deg = 0.0;      ///< to the nearer true mode
  double top2_max_err_deg = 0.0;  ///< best one-to-one assignment, worse of the two
  double live_weight = 0.0;       ///< weight of the top two components
  double mode_spread_deg = 0.0;   ///< largest pairwise distance between component modes
  std::vector<double> loss_trace;
};

/// Fits an M-component mixture with L_mix to samples from the 50/50 mixture
/// of RL(Q·A) and RL(Q·A·Rz(π)), Q Haar-random. Components start at
/// farthest-point seeds among the samples.
MixtureDemoReport run_mixture_demo(const MixtureDemoConfig& cfg, const So3Grid& grid);

}  // namespace so3lap
