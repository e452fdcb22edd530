#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "so3lap/grid.hpp"
#include "so3lap/rng.hpp"

using namespace so3lap;

TEST_CASE("healpix centers") {
  CHECK(healpix_centers(1).size() == 12);
  CHECK(healpix_centers(2).size() == 48);
  for (const auto& v : healpix_centers(8)) CHECK(std::fabs(v.norm() - 1.0) < 1e-12);
  CHECK_THROWS_AS(healpix_centers(3), std::invalid_argument);

  // Equal-area pixels: z-coordinates average to zero and ring counts are symmetric.
  const auto c = healpix_centers(4);
  double zsum = 0.0;
  for (const auto& v : c) zsum += v(2);
  CHECK(std::fabs(zsum) < 1e-12);
}

TEST_CASE("so3 grid sizes") {
  CHECK(build_so3_grid(0).size() == 72);
  CHECK(build_so3_grid(1).size() == 576);
  CHECK(grid_cell_count(3) == 36864);
  CHECK_THROWS_AS(build_so3_grid(6), std::invalid_argument);
  CHECK_THROWS_AS(build_so3_grid(-1), std::invalid_argument);
}

TEST_CASE("grid rotations are proper and Haar-balanced") {
  const So3Grid g = build_so3_grid(3);
  CHECK(g.size() == 36864);
  CHECK(g.cell_weight * static_cast<double>(g.size()) == doctest::Approx(1.0));
  Mat3 mean = Mat3::Zero();
  for (const auto& r : g.rotations) {
    mean += r.matrix();
    CHECK((r.matrix().transpose() * r.matrix() - Mat3::Identity()).norm() < 1e-12);
  }
  mean /= static_cast<double>(g.size());
  CHECK(mean.cwiseAbs().maxCoeff() <= 2.0 / std::sqrt(static_cast<double>(g.size())));
}

TEST_CASE("s3 grid") {
  const S3Grid g0 = build_s3_grid(0);
  CHECK(g0.size() == 72);
  for (const auto& q : g0.quats) CHECK(q.w >= 0.0);
  const S3Grid g = build_s3_grid(2);
  CHECK(g.cell_weight * static_cast<double>(g.size()) ==
        doctest::Approx(2.0 * std::numbers::pi * std::numbers::pi).epsilon(1e-12));

  // Mapping through γ gives the SO(3) grid as a set.
  const So3Grid r = build_so3_grid(2);
  REQUIRE(r.size() == g.size());
  std::vector<bool> used(r.size(), false);
  for (const auto& q : g.quats) {
    const Rotation m = quat_to_rot(q);
    const std::size_t k = nearest_index(r, m);
    CHECK(geodesic_distance(m, r.rotations[k]) < 1e-9);
    CHECK_FALSE(used[k]);
    used[k] = true;
  }
}

TEST_CASE("nearest index") {
  const So3Grid g = build_so3_grid(2);
  for (std::size_t k : {0ul, 17ul, 1000ul, 4607ul}) CHECK(nearest_index(g, g.rotations[k]) == k);

  // Bi-invariance: left-multiplying grid and query by Q keeps the answer.
  Rng rng(2);
  const Rotation q = random_rotation(rng);
  So3Grid moved = g;
  for (auto& r : moved.rotations) r = q * r;
  for (int i = 0; i < 20; ++i) {
    const Rotation x = random_rotation(rng);
    const std::size_t a = nearest_index(g, x);
    const std::size_t b = nearest_index(moved, q * x);
    CHECK(geodesic_distance(g.rotations[a], x) ==
          doctest::Approx(geodesic_distance(moved.rotations[b], q * x)).epsilon(1e-9));
  }
}

TEST_CASE("covering radius shrinks with level") {
  const double r1 = covering_radius_estimate(build_so3_grid(1), 256, 1);
  const double r2 = covering_radius_estimate(build_so3_grid(2), 256, 1);
  const double r3 = covering_radius_estimate(build_so3_grid(3), 256, 1);
  CHECK(r1 > r2);
  CHECK(r2 > r3);
  CHECK(r3 * 180.0 / std::numbers::pi <= 6.0);
}

TEST_CASE("grid cache round trip and corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "so3lap_grid_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const So3Grid g = load_or_build_so3_grid(1, dir);
  const auto file = grid_cache_file(dir, 1);
  CHECK(std::filesystem::exists(file));
  const So3Grid back = load_grid_cache(file);
  REQUIRE(back.size() == g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(back.rotations[i].matrix() == g.rotations[i].matrix());
  }
  {
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS(load_grid_cache(file));
  std::filesystem::remove_all(dir);
}
