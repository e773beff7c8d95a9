#pragma once

#include "biascal/diagnostics.hpp"
#include "biascal/error.hpp"
#include "biascal/inference.hpp"
#include "biascal/residuals.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace biascal {

enum class Method { nobias, koh, ogp };

[[nodiscard]] std::string to_string(Method m);
[[nodiscard]] Method parse_method(const std::string& s);

struct McmcSettings {
  std::size_t steps = 1000;  // retained samples per chain
  std::size_t burn_in = 100;
  std::size_t chains = 2;
  std::uint64_t seed = 0;            // chain k uses seed + k unless seeds is set
  std::vector<std::uint64_t> seeds;  // explicit per-chain seeds
  std::vector<double> proposal_sd;   // empty: 10% of prior SD / range
  std::vector<double> init;          // empty: prior centres
};

struct CalibrationConfig {
  Method method = Method::nobias;
  std::string model;
  std::vector<Prior> priors;          // one per model parameter
  std::optional<Prior> noise_prior;   // nobias only: σ_ε sampled as a trailing parameter
  std::optional<BiasSpec> bias;       // koh / ogp
  McmcSettings mcmc;
  ResidualSetup residual;
  std::size_t band_samples = 500;     // cap on posterior samples swept by fitted_response

  void validate(const ForwardModel& model, const Dataset& data) const;
};

struct CalibrationResult {
  CalibrationConfig config;
  std::vector<std::string> names;
  std::vector<Chain> chains;
  PosteriorSummary summary;
  std::vector<double> theta_map;
  std::optional<FittedGP> bias_fit;
  double wall_seconds = 0.0;
  std::size_t bias_fits = 0;  // bias GPs constructed, sampling and final refit
  std::size_t failed_evaluations = 0;
};

// Raised when a chain aborts; carries the chains that completed.
class ChainFailure : public NumericalError {
 public:
  ChainFailure(const std::string& what, std::vector<Chain> completed)
      : NumericalError(what), completed_(std::move(completed)) {}
  [[nodiscard]] const std::vector<Chain>& completed() const noexcept { return completed_; }

 private:
  std::vector<Chain> completed_;
};

[[nodiscard]] CalibrationResult calibrate(const CalibrationConfig& config, const ForwardModel& model,
                                          const Dataset& data);

struct PredictiveBand {
  enum class Kind { fitted, bias_corrected };
  Points x;
  Points eta;  // zero columns when not extended
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  Kind kind = Kind::fitted;
};

// Moments of f(x, θ_s) over pooled posterior samples plus the measurement
// variance (its posterior mean when σ_ε is sampled).
[[nodiscard]] PredictiveBand fitted_response(const CalibrationResult& result, const ForwardModel& model,
                                             const Dataset& data, const Points& x);
// f(x, θ*) plus the refit bias GP, mapped back to data units.
[[nodiscard]] PredictiveBand bias_corrected_response(const CalibrationResult& result, const ForwardModel& model,
                                                     const Dataset& data, const Points& x, const Points& eta = {});

namespace serial {
[[nodiscard]] PredictiveBand fitted_response(const CalibrationResult& result, const ForwardModel& model,
                                             const Dataset& data, const Points& x);
}  // namespace serial

}  // namespace biascal
