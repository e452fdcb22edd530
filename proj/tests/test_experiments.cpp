#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "so3lap/experiments.hpp"

using namespace so3lap;

TEST_CASE("A spec grammar") {
  CHECK(parse_a_spec("diag:25,5,1") == Vec3(25, 5, 1).asDiagonal().toDenseMatrix());
  Mat3 m;
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  CHECK(parse_a_spec("mat:1,2,3,4,5,6,7,8,9") == m);
  const Mat3 r = parse_a_spec("rand:4");
  CHECK(r == parse_a_spec("rand:4"));
  const Vec3 s = proper_svd(r).s;
  CHECK(s(0) <= 25.0);
  CHECK(s(2) >= 1.0);
  for (const char* bad : {"diag:1,2", "diag:1,2,x", "mat:1", "rand:", "rand:abc", "eye", ""}) {
    CHECK_THROWS_AS(parse_a_spec(bad), std::invalid_argument);
  }
}

TEST_CASE("rotation spec grammar") {
  CHECK(geodesic_distance(parse_rotation_spec("identity"), Rotation::identity()) == 0.0);
  CHECK(geodesic_distance(parse_rotation_spec("quat:0,0,0,2"), exp_map(Vec3(0, 0, 3.14159265358979))) <
        1e-9);
  CHECK(geodesic_distance(parse_rotation_spec("rotvec:0,0,1"), exp_map(Vec3(0, 0, 1))) == 0.0);
  CHECK_THROWS_AS(parse_rotation_spec("mat:1,0,0,0,1,0,0,0,2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rotation_spec("euler:1,2,3"), std::invalid_argument);
}

TEST_CASE("grid cache resolution") {
  ::setenv("SO3LAPLACE_GRID_CACHE", "/tmp/from_env", 1);
  CHECK(resolve_grid_cache(std::string("/tmp/flag")).value() == "/tmp/flag");
  CHECK(resolve_grid_cache(std::nullopt).value() == "/tmp/from_env");
  ::unsetenv("SO3LAPLACE_GRID_CACHE");
  CHECK_FALSE(resolve_grid_cache(std::nullopt).has_value());
}

TEST_CASE("loss increase counting") {
  std::vector<TraceRow> t(5);
  const double losses[] = {3.0, 2.0, 2.5, 1.0, 1.0};
  for (int i = 0; i < 5; ++i) t[static_cast<std::size_t>(i)].loss = losses[i];
  CHECK(count_loss_increases(t) == 1);
  CHECK(count_loss_increases(t, 2) == 0);
}

TEST_CASE("wahba baseline is exact on noiseless data") {
  WahbaConfig cfg;
  cfg.iters = 20;
  cfg.batch = 8;
  cfg.test_n = 20;
  cfg.eval_every = 10;
  const auto rows = run_wahba(cfg, build_so3_grid(1));
  REQUIRE(rows.size() == 3);
  CHECK(rows.back().kabsch_median_deg * 3.14159265358979 / 180.0 <= 1e-6);
}

TEST_CASE("experiments are deterministic in the seed") {
  const So3Grid g = build_so3_grid(1);
  MixtureDemoConfig cfg;
  cfg.n = 200;
  cfg.iters = 20;
  const auto a = run_mixture_demo(cfg, g);
  const auto b = run_mixture_demo(cfg, g);
  CHECK(a.loss_trace == b.loss_trace);

  SampleFitConfig sc;
  sc.n = 300;
  sc.iters = 30;
  CHECK(run_fit_samples(sc, g).a_fit == run_fit_samples(sc, g).a_fit);
}
