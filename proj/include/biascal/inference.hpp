#pragma once

#include "biascal/gp.hpp"
#include "biascal/models.hpp"
#include "biascal/residuals.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace biascal {

struct NormalPrior {
  double mu;
  double sigma;
};
struct LogNormalPrior {
  double mu;  // log-location
  double sigma;
};
struct UniformPrior {
  double a;
  double b;
};

struct Prior {
  std::string name;
  std::variant<NormalPrior, LogNormalPrior, UniformPrior> distribution;

  [[nodiscard]] double log_density(double v) const;
  [[nodiscard]] double center() const;  // mean, median or midpoint
  // 10% of the prior SD, or of the range for uniform priors.
  [[nodiscard]] double default_proposal_sd() const;
  void validate() const;
};

[[nodiscard]] double log_prior(const std::vector<Prior>& priors, std::span<const double> theta);

[[nodiscard]] double log_likelihood_nobias(const ForwardModel& model, std::span<const double> theta,
                                           const Dataset& data, double sigma);

struct BiasSpec {
  explicit BiasSpec(BiasModel m) : model(std::move(m)) {}
  BiasModel model;               // anchors in raw bias-input coordinates
  std::vector<double> fd_steps;  // one per model parameter, orthogonal only
  FitOptions fit;
};

// Modular KOH / OGP likelihood: residuals at θ, bias fit, achieved marginal
// log-likelihood. Holds per-worker caches, so one instance per thread.
class BiasedLikelihood {
 public:
  BiasedLikelihood(const ForwardModel& model, const Dataset& data, BiasSpec spec, ResidualSetup setup);

  [[nodiscard]] double operator()(std::span<const double> theta);
  [[nodiscard]] FittedGP fit(std::span<const double> theta);
  // Bias model at θ: scaled anchors and current sensitivities.
  [[nodiscard]] BiasModel bias_at(std::span<const double> theta) const;

  [[nodiscard]] const Points& inputs() const { return inputs_; }
  [[nodiscard]] const ResidualSetup& setup() const { return setup_; }
  [[nodiscard]] std::size_t fits() const { return fits_; }
  [[nodiscard]] const FitWorkspace& workspace() const { return workspace_; }

 private:
  const ForwardModel& model_;
  const Dataset& data_;
  BiasSpec spec_;
  ResidualSetup setup_;
  Points inputs_;
  Points scaled_anchors_;
  Points anchor_model_inputs_;
  FitWorkspace workspace_;
  std::size_t fits_ = 0;
};

[[nodiscard]] std::pair<double, FittedGP> log_likelihood_biased(const ForwardModel& model,
                                                                std::span<const double> theta, const Dataset& data,
                                                                const BiasSpec& bias,
                                                                const ResidualSetup& setup = {});

struct Chain {
  std::vector<std::string> names;
  Eigen::MatrixXd samples;  // retained steps × parameters
  Eigen::VectorXd log_posterior;
  double acceptance_rate = 0.0;
  std::vector<double> proposal_sd;
  std::uint64_t seed = 0;
  std::size_t burn_in = 0;
  std::size_t failed_evaluations = 0;
};

using LogTarget = std::function<double(std::span<const double>)>;

// Gaussian random walk; `steps` samples are kept after `burn_in` discarded ones.
[[nodiscard]] Chain metropolis_hastings(const LogTarget& target, std::vector<double> init,
                                        std::vector<double> proposal_sd, std::size_t steps, std::size_t burn_in,
                                        std::uint64_t seed);

[[nodiscard]] std::vector<double> map_estimate(const std::vector<Chain>& chains);

}  // namespace biascal
