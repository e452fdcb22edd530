// Rotation Laplace mixture with mixture NLL, relaxed winner-take-all loss and
// top-k mode extraction.
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "so3lap/dist.hpp"

namespace so3lap {

struct RwtaConfig {
  double epsilon = 0.05;
  double lambda = 1.0;

  /// Throws std::invalid_argument unless 0 <= epsilon < 1 and lambda >= 0.
  /// epsilon = 0 gives plain winner-take-all.
  void validate() const;
};

class MixtureModel {
 public:
  /// Throws std::invalid_argument if the lists are empty or differ in length,
  /// a weight lies outside [0, 1], or the weights do not sum to 1 within 1e-9.
  MixtureModel(std::vector<RotationLaplace> components, std::vector<double> weights);

  const std::vector<RotationLaplace>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return components_.size(); }

 private:
  std::vector<RotationLaplace> components_;
  std::vector<double> weights_;
};

/// F(Aᵢ) for every component on one shared grid.
std::vector<double> component_norms(const MixtureModel& m, const So3Grid& grid);

double mix_pdf(const MixtureModel& m, const Rotation& r, std::span<const double> norms);
/// −log Σ wᵢ pᵢ(R), via log-sum-exp over the component log densities.
double mix_nll(const MixtureModel& m, const Rotation& r, std::span<const double> norms);

struct RwtaResult {
  double loss = 0.0;
  std::size_t winner = 0;
  std::vector<double> pi;
  std::vector<double> nll;  ///< per-component −log pᵢ(R)
  bool tie = false;         ///< another component within 1e-12 of the winner's log pdf
};

/// Winner = argmax pᵢ(R) (lowest index on ties); πᵢ = 1 − ε for the winner
/// and ε/(M − 1) otherwise (π = 1 when M = 1); loss = Σ πᵢ·NLLᵢ.
RwtaResult rwta_loss(const MixtureModel& m, const Rotation& r, std::span<const double> norms,
                     const RwtaConfig& cfg = {});

/// mix_nll + λ·rwta_loss.
double mix_total_loss(const MixtureModel& m, const Rotation& r, std::span<const double> norms,
                      const RwtaConfig& cfg = {});

/// The k component modes with the largest weights (ties by index). Throws
/// std::invalid_argument for k ∉ [1, M] and std::domain_error when a
/// selected component has no unique mode.
std::vector<std::pair<Rotation, double>> top_k_modes(const MixtureModel& m, std::size_t k);

/// {"components": [[9 row-major floats], ...], "weights": [...], "eps_clip": ε}
nlohmann::json mixture_to_json(const MixtureModel& m);
MixtureModel mixture_from_json(const nlohmann::json& j);

}  // namespace so3lap
