// Lookup table of F(diag(s1, s2, s3)) and ∂F/∂sᵢ with trilinear interpolation.
#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "so3lap/dist.hpp"

namespace so3lap {

struct AxisSpec {
  double lo = 0.01;
  double hi = 100.0;
  int knots = 64;
  bool log_spaced = true;

  std::vector<double> knots_vector() const;
  void validate() const;
};

struct NormTableSpec {
  std::array<AxisSpec, 3> axes{};
  int grid_level = kDefaultNormLevel;
  double eps_clip = kDefaultEpsClip;
};

struct NormTable {
  NormTableSpec spec;
  std::array<std::vector<double>, 3> axes;
  /// s1-major: index ((i·n2) + j)·n3 + k.
  std::vector<double> values;
  std::array<std::vector<double>, 3> grads;

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * axes[1].size() + j) * axes[2].size() + k;
  }
};

struct NormQuery {
  double f = 0.0;
  Vec3 grad = Vec3::Zero();
};

/// Fills values by grid summation at every knot and gradients by central
/// differences over the knot spacing (one-sided at the ends). When all three
/// axes coincide only sorted triples are evaluated, since F is symmetric
/// under permutation of the singular values. `threads` = 0 uses the hardware
/// concurrency.
NormTable build_norm_table(const NormTableSpec& spec, unsigned threads = 0);

/// Trilinear interpolation of value and gradient. Throws std::out_of_range
/// when any coordinate lies outside its axis.
NormQuery query_norm_table(const NormTable& table, double s1, double s2, double s3);

/// Binary "RLUT" file plus `<file>.json` metadata.
void save_norm_table(const NormTable& table, const std::filesystem::path& file);
NormTable load_norm_table(const std::filesystem::path& file);

}  // namespace so3lap
