#include "so3lap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "binary_io.hpp"
#include "so3lap/rng.hpp"

namespace so3lap {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint32_t kGridCacheVersion = 1;

std::int64_t isqrt(std::int64_t v) {
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// (colatitude, longitude) of HEALPix ring-scheme pixel centers.
std::vector<std::pair<double, double>> healpix_angles(int nside) {
  if (!is_power_of_two(nside)) {
    throw std::invalid_argument("healpix: nside must be a power of two, got " +
                                std::to_string(nside));
  }
  const std::int64_t n = nside;
  const std::int64_t npix = 12 * n * n;
  const std::int64_t ncap = 2 * n * (n - 1);
  const double fact2 = 4.0 / static_cast<double>(npix);
  const double fact1 = 2.0 / (3.0 * static_cast<double>(n));

  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(npix));
  for (std::int64_t p = 0; p < npix; ++p) {
    double z;
    double phi;
    if (p < ncap) {
      const std::int64_t iring = (1 + isqrt(1 + 2 * p)) >> 1;
      const std::int64_t iphi = p + 1 - 2 * iring * (iring - 1);
      z = 1.0 - static_cast<double>(iring * iring) * fact2;
      phi = (static_cast<double>(iphi) - 0.5) * (0.5 * kPi) / static_cast<double>(iring);
    } else if (p < npix - ncap) {
      const std::int64_t ip = p - ncap;
      const std::int64_t tmp = ip / (4 * n);
      const std::int64_t iring = tmp + n;
      const std::int64_t iphi = ip - 4 * n * tmp + 1;
      const double fodd = ((iring + n) & 1) ? 1.0 : 0.5;
      z = static_cast<double>(2 * n - iring) * fact1;
      phi = (static_cast<double>(iphi) - fodd) * kPi / static_cast<double>(2 * n);
    } else {
      const std::int64_t ip = npix - p;
      const std::int64_t iring = (1 + isqrt(2 * ip - 1)) >> 1;
      const std::int64_t iphi = 4 * iring + 1 - (ip - 2 * iring * (iring - 1));
      z = -1.0 + static_cast<double>(iring * iring) * fact2;
      phi = (static_cast<double>(iphi) - 0.5) * (0.5 * kPi) / static_cast<double>(iring);
    }
    out.emplace_back(std::acos(std::clamp(z, -1.0, 1.0)), phi);
  }
  return out;
}

void check_level(int level) {
  if (level < 0 || level > kMaxGridLevel) {
    throw std::invalid_argument("grid level must be in [0, " + std::to_string(kMaxGridLevel) +
                                "], got " + std::to_string(level));
  }
}

// Hopf-coordinate quaternions; ψ ∈ [0, 2π) covers each rotation once.
std::vector<UnitQuaternion> hopf_quaternions(int level) {
  const int nside = 1 << level;
  const auto pixels = healpix_angles(nside);
  const int fibre = 6 * nside;
  const double golden = 0.5 * (1.0 + std::sqrt(5.0));

  std::vector<UnitQuaternion> qs;
  qs.reserve(pixels.size() * static_cast<std::size_t>(fibre));
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto [theta, phi] = pixels[i];
    double whole;
    const double offset = 2.0 * kPi * std::modf(static_cast<double>(i) * golden, &whole);
    const double ct = std::cos(0.5 * theta);
    const double st = std::sin(0.5 * theta);
    for (int j = 0; j < fibre; ++j) {
      const double psi = std::fmod(offset + 2.0 * kPi * j / fibre, 2.0 * kPi);
      const double half = 0.5 * psi;
      qs.push_back(UnitQuaternion::normalized(ct * std::cos(half), ct * std::sin(half),
                                              st * std::cos(phi + half),
                                              st * std::sin(phi + half)));
    }
  }
  return qs;
}

}  // namespace

std::size_t grid_cell_count(int level) {
  check_level(level);
  return std::size_t{72} << (3 * level);
}

std::vector<Vec3> healpix_centers(int nside) {
  const auto angles = healpix_angles(nside);
  std::vector<Vec3> out;
  out.reserve(angles.size());
  for (const auto& [theta, phi] : angles) {
    const double st = std::sin(theta);
    out.emplace_back(st * std::cos(phi), st * std::sin(phi), std::cos(theta));
  }
  return out;
}

So3Grid build_so3_grid(int level) {
  check_level(level);
  So3Grid grid;
  grid.level = level;
  const auto qs = hopf_quaternions(level);
  grid.rotations.reserve(qs.size());
  for (const auto& q : qs) grid.rotations.push_back(quat_to_rot(q));
  grid.cell_weight = 1.0 / static_cast<double>(grid.rotations.size());
  return grid;
}

S3Grid build_s3_grid(int level) {
  check_level(level);
  S3Grid grid;
  grid.level = level;
  grid.quats = hopf_quaternions(level);
  for (auto& q : grid.quats) q = q.canonical();
  grid.cell_weight = 2.0 * kPi * kPi / static_cast<double>(grid.quats.size());
  return grid;
}

std::size_t nearest_index(const So3Grid& grid, const Rotation& r) {
  if (grid.rotations.empty()) throw std::invalid_argument("nearest_index: empty grid");
  // Geodesic distance is monotone decreasing in tr(RᵀRᵢ).
  const Mat3& m = r.matrix();
  std::size_t best = 0;
  double best_tr = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.rotations.size(); ++i) {
    const double tr = (m.array() * grid.rotations[i].matrix().array()).sum();
    if (tr > best_tr) {
      best_tr = tr;
      best = i;
    }
  }
  return best;
}

double covering_radius_estimate(const So3Grid& grid, std::size_t queries, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < queries; ++k) {
    const Rotation q = random_rotation(rng);
    const std::size_t i = nearest_index(grid, q);
    worst = std::max(worst, geodesic_distance(q, grid.rotations[i]));
  }
  return worst;
}

void save_grid_cache(const So3Grid& grid, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open grid cache for writing: " + file.string());
  detail::write_magic(out, "SO3G");
  detail::write_le<std::uint32_t>(out, kGridCacheVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.level));
  detail::write_le<std::uint64_t>(out, grid.rotations.size());
  for (const auto& r : grid.rotations) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) detail::write_le<double>(out, r(i, j));
    }
  }
  if (!out) throw std::runtime_error("failed writing grid cache: " + file.string());
}

So3Grid load_grid_cache(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open grid cache: " + file.string());
  detail::expect_magic(in, "SO3G", "grid cache");
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kGridCacheVersion) {
    throw std::runtime_error("grid cache: unsupported version " + std::to_string(version));
  }
  So3Grid grid;
  grid.level = static_cast<int>(detail::read_le<std::uint32_t>(in));
  const auto count = detail::read_le<std::uint64_t>(in);
  if (grid.level > kMaxGridLevel || count != grid_cell_count(grid.level)) {
    throw std::runtime_error("grid cache: inconsistent level/count");
  }
  grid.rotations.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    Mat3 m;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m(i, j) = detail::read_le<double>(in);
    }
    grid.rotations.emplace_back(m);
  }
  grid.cell_weight = 1.0 / static_cast<double>(count);
  return grid;
}

std::filesystem::path grid_cache_file(const std::filesystem::path& dir, int level) {
  return dir / ("so3_grid_l" + std::to_string(level) + ".bin");
}

So3Grid load_or_build_so3_grid(int level, const std::optional<std::filesystem::path>& cache_dir) {
  check_level(level);
  if (!cache_dir) return build_so3_grid(level);
  const auto file = grid_cache_file(*cache_dir, level);
  if (std::filesystem::exists(file)) return load_grid_cache(file);
  So3Grid grid = build_so3_grid(level);
  std::filesystem::create_directories(*cache_dir);
  save_grid_cache(grid, file);
  return grid;
}

}  // namespace so3lap
