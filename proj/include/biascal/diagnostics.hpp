#pragma once

#include "biascal/inference.hpp"

#include <string>
#include <utility>
#include <vector>

namespace biascal {

struct ParameterSummary {
  double mean;
  double sd;
  double hdi_3;
  double hdi_97;
  double mcse_mean;
  double mcse_sd;
  double r_hat;
};

struct PosteriorSummary {
  std::vector<std::string> names;
  std::vector<ParameterSummary> rows;

  [[nodiscard]] const ParameterSummary& at(const std::string& name) const;
};

// Narrowest window of sorted samples holding ceil(prob·n) of them.
[[nodiscard]] std::pair<double, double> hdi(std::vector<double> samples, double prob = 0.94);

// Classical R̂ over equal-length chains (longer ones are truncated); a single
// chain is split into halves.
[[nodiscard]] double gelman_rubin(const std::vector<Eigen::VectorXd>& chains);
[[nodiscard]] double gelman_rubin(const std::vector<Chain>& chains, Eigen::Index parameter);

// Geyer initial positive sequence on chains centred at the pooled mean; floor 1.
[[nodiscard]] double effective_sample_size(const std::vector<Eigen::VectorXd>& chains);

struct MonteCarloError {
  double mean;
  double sd;  // sd / sqrt(2·ESS)
};
[[nodiscard]] MonteCarloError mcse(const Eigen::VectorXd& samples);

[[nodiscard]] PosteriorSummary summarize(const std::vector<Chain>& chains);

}  // namespace biascal
