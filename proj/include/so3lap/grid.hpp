// Equivolumetric discretizations of SO(3) and S³.
//
// HEALPix ring-scheme pixel centers on S² are threaded with equally spaced
// Hopf-fibre angles. With nside = 2^level and 6·2^level fibre samples per
// pixel the grid has 72·8^level cells of equal Haar volume.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "so3lap/so3.hpp"

namespace so3lap {

inline constexpr int kMaxGridLevel = 5;

struct So3Grid {
  int level = 0;
  std::vector<Rotation> rotations;
  /// Haar weight ΔR of one cell; cell_weight·size() = 1.
  double cell_weight = 0.0;

  std::size_t size() const { return rotations.size(); }
};

struct S3Grid {
  int level = 0;
  /// One representative per antipodal pair, all with w ≥ 0.
  std::vector<UnitQuaternion> quats;
  /// Δq = 2π²/|G_q|.
  double cell_weight = 0.0;

  std::size_t size() const { return quats.size(); }
};

/// 72·8^level.
std::size_t grid_cell_count(int level);

/// Unit vectors at the 12·nside² HEALPix ring-scheme pixel centers.
/// Throws std::invalid_argument unless nside is a power of two.
std::vector<Vec3> healpix_centers(int nside);

/// Deterministic SO(3) grid; throws std::invalid_argument for level ∉ [0, 5].
So3Grid build_so3_grid(int level);
S3Grid build_s3_grid(int level);

/// Index of the geodesically nearest grid rotation (exhaustive scan, lowest
/// index on ties).
std::size_t nearest_index(const So3Grid& grid, const Rotation& r);

/// Largest nearest-cell distance over `queries` Haar-random rotations.
double covering_radius_estimate(const So3Grid& grid, std::size_t queries = 512,
                                std::uint64_t seed = 0);

// Binary grid cache: "SO3G", u32 version = 1, u32 level, u64 count, then
// count·9 little-endian f64 (row-major rotation entries).
void save_grid_cache(const So3Grid& grid, const std::filesystem::path& file);
So3Grid load_grid_cache(const std::filesystem::path& file);
std::filesystem::path grid_cache_file(const std::filesystem::path& dir, int level);

/// Loads the cached grid from `cache_dir` when present, otherwise builds it
/// (and writes the cache if a directory was given).
So3Grid load_or_build_so3_grid(int level,
                               const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

}  // namespace so3lap
