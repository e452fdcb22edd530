#include "so3lap/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace so3lap {

namespace {

void check_norms(const MixtureModel& m, std::span<const double> norms) {
  if (norms.size() != m.size()) {
    throw std::invalid_argument("mixture: expected one normalization per component");
  }
}

std::vector<double> component_log_pdfs(const MixtureModel& m, const Rotation& r,
                                       std::span<const double> norms) {
  check_norms(m, norms);
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    out[i] = rl_log_pdf(m.components()[i], r, norms[i]);
  }
  return out;
}

}  // namespace

void RwtaConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("RwtaConfig: epsilon must lie in [0, 1)");
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("RwtaConfig: lambda must be >= 0");
}

MixtureModel::MixtureModel(std::vector<RotationLaplace> components, std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw std::invalid_argument("MixtureModel: no components");
  if (components_.size() != weights_.size()) {
    throw std::invalid_argument("MixtureModel: component and weight counts differ");
  }
  for (double w : weights_) {
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("MixtureModel: weight outside [0, 1]");
  }
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::fabs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("MixtureModel: weights sum to " + std::to_string(total));
  }
}

std::vector<double> component_norms(const MixtureModel& m, const So3Grid& grid) {
  std::vector<double> out;
  out.reserve(m.size());
  for (const auto& c : m.components()) out.push_back(rl_norm_grid(c, grid));
  return out;
}

double mix_pdf(const MixtureModel& m, const Rotation& r, std::span<const double> norms) {
  const auto lp = component_log_pdfs(m, r, norms);
  double sum = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) sum += m.weights()[i] * std::exp(lp[i]);
  return sum;
}

double mix_nll(const MixtureModel& m, const Rotation& r, std::span<const double> norms) {
  const auto lp = component_log_pdfs(m, r, norms);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.weights()[i] > 0.0) top = std::max(top, std::log(m.weights()[i]) + lp[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.weights()[i] > 0.0) sum += std::exp(std::log(m.weights()[i]) + lp[i] - top);
  }
  return -(top + std::log(sum));
}

RwtaResult rwta_loss(const MixtureModel& m, const Rotation& r, std::span<const double> norms,
                     const RwtaConfig& cfg) {
  cfg.validate();
  const auto lp = component_log_pdfs(m, r, norms);
  RwtaResult res;
  const std::size_t n = m.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (lp[i] > lp[res.winner]) res.winner = i;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i != res.winner && std::fabs(lp[i] - lp[res.winner]) <= 1e-12) res.tie = true;
  }
  res.pi.assign(n, n == 1 ? 1.0 : cfg.epsilon / static_cast<double>(n - 1));
  res.pi[res.winner] = n == 1 ? 1.0 : 1.0 - cfg.epsilon;
  res.nll.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.nll[i] = -lp[i];
    res.loss += res.pi[i] * res.nll[i];
  }
  return res;
}

double mix_total_loss(const MixtureModel& m, const Rotation& r, std::span<const double> norms,
                      const RwtaConfig& cfg) {
  return mix_nll(m, r, norms) + cfg.lambda * rwta_loss(m, r, norms, cfg).loss;
}

std::vector<std::pair<Rotation, double>> top_k_modes(const MixtureModel& m, std::size_t k) {
  if (k < 1 || k > m.size()) throw std::invalid_argument("top_k_modes: k must lie in [1, M]");
  std::vector<std::size_t> order(m.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return m.weights()[a] > m.weights()[b];
  });
  std::vector<std::pair<Rotation, double>> out;
  for (std::size_t i = 0; i < k; ++i) {
    const auto mode = rl_mode(m.components()[order[i]]);
    const auto* unique = std::get_if<UniqueMode>(&mode);
    if (!unique) {
      throw std::domain_error("top_k_modes: component " + std::to_string(order[i]) +
                              " has no unique mode");
    }
    out.emplace_back(unique->r, m.weights()[order[i]]);
  }
  return out;
}

nlohmann::json mixture_to_json(const MixtureModel& m) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : m.components()) {
    std::vector<double> flat;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) flat.push_back(c.a()(i, j));
    }
    comps.push_back(flat);
  }
  return {{"components", comps},
          {"weights", m.weights()},
          {"eps_clip", m.components().front().eps_clip()}};
}

MixtureModel mixture_from_json(const nlohmann::json& j) {
  const double eps = j.value("eps_clip", kDefaultEpsClip);
  std::vector<RotationLaplace> comps;
  for (const auto& c : j.at("components")) {
    const auto flat = c.get<std::vector<double>>();
    if (flat.size() != 9) throw std::invalid_argument("mixture json: component needs 9 entries");
    Mat3 a;
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = flat[static_cast<std::size_t>(i)];
    comps.emplace_back(a, eps);
  }
  return MixtureModel(std::move(comps), j.at("weights").get<std::vector<double>>());
}

}  // namespace so3lap
