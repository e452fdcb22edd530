#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "so3lap/mixture.hpp"
#include "so3lap/rng.hpp"

using namespace so3lap;

namespace {

const So3Grid& grid() {
  static const So3Grid g = build_so3_grid(3);
  return g;
}

MixtureModel separated(const std::vector<double>& w, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<RotationLaplace> comps;
  for (std::size_t i = 0; i < w.size(); ++i) {
    comps.emplace_back(random_rotation(rng).matrix() * Vec3(30, 25, 20).asDiagonal());
  }
  return MixtureModel(comps, w);
}

}  // namespace

TEST_CASE("construction checks") {
  const RotationLaplace d(Mat3::Identity());
  CHECK_THROWS_AS(MixtureModel({d, d}, {0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(MixtureModel({d}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(MixtureModel({}, {}), std::invalid_argument);
  RwtaConfig bad;
  bad.epsilon = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("mixture pdf") {
  Rng rng(2);
  const RotationLaplace d(random_rotation(rng).matrix() * Vec3(8, 4, 2).asDiagonal());
  const MixtureModel one({d}, {1.0});
  const MixtureModel twin({d, d}, {0.5, 0.5});
  const auto n1 = component_norms(one, grid());
  const auto n2 = component_norms(twin, grid());
  for (int i = 0; i < 20; ++i) {
    const Rotation r = random_rotation(rng);
    CHECK(mix_pdf(one, r, n1) == std::exp(rl_log_pdf(d, r, n1[0])));
    CHECK(mix_pdf(twin, r, n2) == doctest::Approx(mix_pdf(one, r, n1)).epsilon(1e-14));
    CHECK(mix_nll(one, r, n1) == doctest::Approx(-rl_log_pdf(d, r, n1[0])).epsilon(1e-14));
  }

  const MixtureModel m = separated({0.5, 0.3, 0.2});
  const auto norms = component_norms(m, grid());
  double sum = 0.0;
  for (const auto& r : grid().rotations) sum += mix_pdf(m, r, norms) * grid().cell_weight;
  CHECK(std::fabs(sum - 1.0) <= 1e-6);
}

TEST_CASE("mixture NLL against an extended-precision oracle") {
  const MixtureModel m = separated({0.6, 0.3, 0.1}, 3);
  const auto norms = component_norms(m, grid());
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const Rotation r = i % 2 ? random_rotation(rng) : m.components()[1].svd().uvt();
    long double total = 0.0L;
    for (std::size_t k = 0; k < m.size(); ++k) {
      const long double c = rl_trace_term(m.components()[k], r);
      const long double sc = std::sqrt(c);
      total += static_cast<long double>(m.weights()[k]) * std::exp(-sc) / sc /
               static_cast<long double>(norms[k]);
    }
    const double oracle = static_cast<double>(-std::log(total));
    CHECK(mix_nll(m, r, norms) == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("adding a far component with small weight") {
  Rng rng(5);
  const RotationLaplace a(random_rotation(rng).matrix() * Vec3(30, 25, 20).asDiagonal());
  const RotationLaplace far(a.svd().uvt().matrix() * exp_map(Vec3(3.0, 0, 0)).matrix() * 30.0);
  const double delta = 1e-3;
  const MixtureModel base({a}, {1.0});
  const MixtureModel more({a, far}, {1.0 - delta, delta});
  const auto nb = component_norms(base, grid());
  const auto nm = component_norms(more, grid());
  const Rotation r = a.svd().uvt() * exp_map(Vec3(0.05, 0.02, 0));
  const double change = mix_nll(more, r, nm) - mix_nll(base, r, nb);
  CHECK(change <= -std::log(1.0 - delta) + 1e-12);
  CHECK(change >= 0.0);
}

TEST_CASE("relaxed winner-take-all") {
  const MixtureModel m = separated({0.25, 0.25, 0.25, 0.25}, 6);
  const auto norms = component_norms(m, grid());
  const RwtaResult at0 = rwta_loss(m, m.components()[0].svd().uvt(), norms);
  CHECK(at0.winner == 0);
  REQUIRE(at0.pi.size() == 4);
  CHECK(at0.pi[0] == 0.95);
  for (int k = 1; k < 4; ++k) CHECK(at0.pi[static_cast<std::size_t>(k)] == 0.05 / 3);

  const Rotation r2 = m.components()[2].svd().uvt() * exp_map(Vec3(0.01, 0, 0));
  CHECK(rwta_loss(m, r2, norms).winner == 2);

  RwtaConfig wta;
  wta.epsilon = 0.0;
  const RwtaResult pure = rwta_loss(m, r2, norms, wta);
  CHECK(pure.loss == doctest::Approx(-rl_log_pdf(m.components()[2], r2, norms[2])));

  RwtaConfig none;
  none.lambda = 0.0;
  CHECK(mix_total_loss(m, r2, norms, none) == mix_nll(m, r2, norms));
  const RwtaConfig def;
  CHECK(mix_total_loss(m, r2, norms, def) ==
        doctest::Approx(mix_nll(m, r2, norms) + rwta_loss(m, r2, norms, def).loss));

  const MixtureModel single = separated({1.0}, 7);
  const auto ns = component_norms(single, grid());
  Rng rng(8);
  const Rotation r = random_rotation(rng);
  CHECK(mix_total_loss(single, r, ns) == doctest::Approx(2.0 * mix_nll(single, r, ns)));
}

TEST_CASE("top-k modes") {
  const MixtureModel m = separated({0.2, 0.7, 0.1}, 9);
  const auto all = top_k_modes(m, 3);
  CHECK(all.size() == 3);
  const auto top2 = top_k_modes(m, 2);
  CHECK(top2[0].second == 0.7);
  CHECK(top2[1].second == 0.2);
  CHECK(geodesic_distance(top2[0].first, m.components()[1].svd().uvt()) < 1e-12);
  CHECK(geodesic_distance(top2[1].first, m.components()[0].svd().uvt()) < 1e-12);
  CHECK_THROWS_AS(top_k_modes(m, 0), std::invalid_argument);
  CHECK_THROWS_AS(top_k_modes(m, 4), std::invalid_argument);
}

TEST_CASE("json round trip") {
  const MixtureModel m = separated({0.5, 0.5}, 10);
  const MixtureModel back = mixture_from_json(mixture_to_json(m));
  REQUIRE(back.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back.components()[k].a() == m.components()[k].a());
    CHECK(back.weights()[k] == m.weights()[k]);
  }
  CHECK_THROWS(mixture_from_json(nlohmann::json{{"components", 3}}));
}
