#pragma once

#include "biascal/kernels.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace biascal {

struct LogNormalHyperprior {
  double mu;
  double sigma;
};

struct BiasModel {
  explicit BiasModel(Kernel k) : kernel(std::move(k)) {}

  Hyperparameter mean = Hyperparameter(0.0);
  Kernel kernel;
  Points anchors;  // used only when orthogonal
  bool orthogonal = false;
  double jitter = 0.0;
  double noise_sd = 0.0;  // prescribed measurement noise σ_n
  // Sensitivities at the anchors for the current model parameters.
  Eigen::MatrixXd sensitivities;
  // Keyed by free-parameter name ("mean" or the kernel path); flat otherwise.
  std::map<std::string, LogNormalHyperprior> hyperpriors;

  void validate() const;
};

// Mean first (if free), then kernel parameters in kernel order.
[[nodiscard]] std::vector<FreeParameter> free_parameters(const BiasModel& bias);
[[nodiscard]] BiasModel with_free_values(const BiasModel& bias, std::span<const double> values);
[[nodiscard]] double log_hyperprior(const BiasModel& bias);

// Correlated part of the bias covariance (orthogonally corrected when requested).
[[nodiscard]] Eigen::MatrixXd signal_covariance(const BiasModel& bias, const Points& x, GramCache* cache = nullptr,
                                                std::optional<std::string>* warning = nullptr);
[[nodiscard]] Eigen::MatrixXd signal_covariance(const BiasModel& bias, const Points& x, const Points& xp,
                                                GramCache* cache = nullptr);
// Diagonal noise variances from noise kernels plus σ_n².
[[nodiscard]] Eigen::VectorXd noise_variance(const BiasModel& bias, const Points& x);
[[nodiscard]] Eigen::MatrixXd training_covariance(const BiasModel& bias, const Points& x, GramCache* cache = nullptr,
                                                  std::optional<std::string>* warning = nullptr);

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// Diagonal shifts tried in order: the configured jitter, then 1e-10·trace/n
// growing tenfold up to 1e-4·trace/n.
[[nodiscard]] std::vector<double> jitter_ladder(double configured, double trace, Eigen::Index n);
// Cholesky with jitter escalation; nullopt when every level fails.
[[nodiscard]] std::optional<Factorization> factorize(const Eigen::MatrixXd& c, double jitter);

[[nodiscard]] double log_marginal_likelihood(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r,
                                             GramCache* cache = nullptr);

struct FittedGP {
  BiasModel bias;
  Points inputs;
  Eigen::VectorXd residuals;
  Eigen::LLT<Eigen::MatrixXd> factor;
  Eigen::VectorXd alpha;  // (C + σ_n²I + jitter·I)⁻¹ (r - μ_b)
  double log_likelihood;
  double jitter_used;
  std::vector<std::string> warnings;
};

// Eigendecomposition of the unit-scale signal gram, reused while it does not change.
struct SpectralCache {
  Eigen::MatrixXd unit;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  std::size_t decompositions = 0;
};

struct FitWorkspace {
  GramCache grams;
  SpectralCache spectral;
};

struct FitOptions {
  std::size_t restarts = 4;
  double tolerance = 1e-6;
  std::size_t max_iterations = 0;  // 0 selects 200 + 100·dim
  bool allow_spectral = true;
  bool allow_grouped = true;  // Woodbury route when inputs repeat (distinct rows <= n/2)
};

struct MapSearch {
  BiasModel bias;  // free values at the optimum
  double log_likelihood;
  double log_hyperprior;
  bool spectral;
  std::size_t evaluations;
  bool grouped = false;
};

// Same value as log_marginal_likelihood, computed over the distinct rows of x
// (O(n·m²) for m distinct inputs). nullopt if the signal block is indefinite.
[[nodiscard]] std::optional<double> grouped_log_likelihood(const BiasModel& bias, const Points& x,
                                                           const Eigen::VectorXd& r, GramCache* cache = nullptr);

// Maximizes log marginal likelihood + log hyperprior over the free hyperparameters.
[[nodiscard]] MapSearch search_map(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r,
                                   FitWorkspace* workspace = nullptr, const FitOptions& options = {});
// search_map followed by a Cholesky factorization at the optimum.
[[nodiscard]] FittedGP fit_map(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r,
                               FitWorkspace* workspace = nullptr, const FitOptions& options = {});
// Factorization at the given hyperparameters without optimizing.
[[nodiscard]] FittedGP condition(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r,
                                 GramCache* cache = nullptr);

// Same value as log_marginal_likelihood, evaluated from the eigendecomposition
// of the scale-free signal gram. Requires scale_parameter() on the kernel and a
// homoscedastic fixed diagonal. Exposed to cross-check the two routes.
[[nodiscard]] double spectral_log_likelihood(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r,
                                             FitWorkspace& workspace);
[[nodiscard]] bool spectral_applicable(const BiasModel& bias, const Points& x);

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t clipped = 0;  // variances in [-1e-10, 0) set to zero
  [[nodiscard]] Eigen::VectorXd variance() const { return covariance.diagonal(); }
};

// Posterior of the bias at new records; noise kernels contribute to the
// query diagonal, cross terms carry none.
[[nodiscard]] Prediction predict(const FittedGP& fit, const Points& query, GramCache* cache = nullptr);

}  // namespace biascal
