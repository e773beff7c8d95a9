#include "biascal/calibration.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <limits>

namespace biascal {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

struct SweepInputs {
  std::vector<std::vector<double>> thetas;  // model parameters per retained sample
  double noise_var;
};

SweepInputs sweep_inputs(const CalibrationResult& result, const ForwardModel& model, const Dataset& data) {
  if (result.chains.empty()) throw ConfigError("fitted_response: result has no chains");
  const std::size_t t = model.parameter_count();
  std::vector<const Chain*> order;
  std::size_t total = 0;
  for (const auto& c : result.chains) total += static_cast<std::size_t>(c.samples.rows());
  const std::size_t cap = std::max<std::size_t>(1, result.config.band_samples);
  const std::size_t stride = total > cap ? (total + cap - 1) / cap : 1;

  SweepInputs in{{}, 0.0};
  const bool latent = result.config.noise_prior.has_value();
  double sigma_sq = 0.0;
  std::size_t index = 0;
  for (const auto& c : result.chains) {
    for (Eigen::Index i = 0; i < c.samples.rows(); ++i, ++index) {
      if (index % stride != 0) continue;
      std::vector<double> th(t);
      for (std::size_t k = 0; k < t; ++k) th[k] = c.samples(i, static_cast<Eigen::Index>(k));
      in.thetas.push_back(std::move(th));
      if (latent) {
        const double s = c.samples(i, static_cast<Eigen::Index>(t));
        sigma_sq += s * s;
      }
    }
  }
  in.noise_var = latent ? sigma_sq / static_cast<double>(in.thetas.size()) : data.sigma_meas * data.sigma_meas;
  return in;
}

void moments_at(const ForwardModel& model, const SweepInputs& in, std::span<const double> x, double& mean,
                double& sd) {
  double s = 0.0;
  double s2 = 0.0;
  for (const auto& th : in.thetas) {
    const double f = model.evaluate(th, x);
    s += f;
    s2 += f * f;
  }
  const auto n = static_cast<double>(in.thetas.size());
  mean = s / n;
  const double var = std::max(0.0, s2 / n - mean * mean);
  sd = std::sqrt(var + in.noise_var);
}

PredictiveBand sweep(const CalibrationResult& result, const ForwardModel& model, const Dataset& data, const Points& x,
                     bool parallel) {
  if (x.rows() == 0) throw ConfigError("fitted_response: empty query grid");
  const SweepInputs in = sweep_inputs(result, model, data);
  PredictiveBand b;
  b.x = x;
  b.mean.resize(x.rows());
  b.sd.resize(x.rows());
  b.kind = PredictiveBand::Kind::fitted;
  std::exception_ptr error;
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    try {
      moments_at(model, in, row(x, i), b.mean[i], b.sd[i]);
    } catch (...) {
#pragma omp critical(biascal_sweep_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return b;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::nobias: return "nobias";
    case Method::koh: return "koh";
    case Method::ogp: return "ogp";
  }
  return "nobias";
}

Method parse_method(const std::string& s) {
  if (s == "nobias") return Method::nobias;
  if (s == "koh") return Method::koh;
  if (s == "ogp") return Method::ogp;
  throw ConfigError("unknown method '" + s + "' (expected nobias, koh or ogp)");
}

void CalibrationConfig::validate(const ForwardModel& m, const Dataset& data) const {
  data.validate();
  if (priors.size() != m.parameter_count())
    throw ConfigError("config: " + std::to_string(priors.size()) + " priors for " +
                      std::to_string(m.parameter_count()) + " model parameters");
  for (const auto& p : priors) p.validate();
  if (data.x.cols() != static_cast<Eigen::Index>(m.input_dimension()))
    throw DimensionError("config: dataset x has " + std::to_string(data.x.cols()) + " columns, model expects " +
                         std::to_string(m.input_dimension()));
  if (residual.extended && !data.has_eta()) throw ConfigError("config: extension requested but dataset has no eta");
  if (!(residual.residual_scale > 0.0)) throw ConfigError("config: residual scale must be positive");
  const std::size_t dim = priors.size() + (noise_prior ? 1 : 0);
  if (mcmc.steps == 0) throw ConfigError("config: mcmc.steps must be >= 1");
  if (mcmc.chains == 0) throw ConfigError("config: mcmc.chains must be >= 1");
  if (!mcmc.seeds.empty() && mcmc.seeds.size() != mcmc.chains)
    throw ConfigError("config: mcmc.seeds must list one seed per chain");
  if (!mcmc.proposal_sd.empty() && mcmc.proposal_sd.size() != dim)
    throw ConfigError("config: mcmc.proposal_sd must have " + std::to_string(dim) + " entries");
  if (!mcmc.init.empty() && mcmc.init.size() != dim)
    throw ConfigError("config: mcmc.init must have " + std::to_string(dim) + " entries");
  if (method == Method::nobias) {
    if (bias) throw ConfigError("config: method nobias takes no bias model");
    if (noise_prior)
      noise_prior->validate();
    else if (!(data.sigma_meas > 0.0))
      throw ConfigError("config: nobias needs a positive measurement noise or a latent noise prior");
  } else {
    if (!bias) throw ConfigError("config: method " + to_string(method) + " requires a bias model");
    if (noise_prior) throw ConfigError("config: latent noise is only supported for nobias");
    if ((method == Method::ogp) != bias->model.orthogonal)
      throw ConfigError("config: bias orthogonality must match the method");
    if (method == Method::ogp && bias->model.anchors.rows() == 0) throw ConfigError("config: ogp requires anchors");
    bias->model.validate();
  }
}

CalibrationResult calibrate(const CalibrationConfig& config, const ForwardModel& model, const Dataset& data) {
  const auto start = std::chrono::steady_clock::now();
  config.validate(model, data);

  CalibrationResult result;
  result.config = config;
  result.names = model.parameter_names();
  std::vector<Prior> priors = config.priors;
  if (config.noise_prior) {
    priors.push_back(*config.noise_prior);
    result.names.push_back(config.noise_prior->name.empty() ? "sigma" : config.noise_prior->name);
  }
  const std::size_t t_model = model.parameter_count();
  const std::size_t n_chains = config.mcmc.chains;

  std::vector<double> init = config.mcmc.init;
  std::vector<double> sd = config.mcmc.proposal_sd;
  if (init.empty())
    for (const auto& p : priors) init.push_back(p.center());
  if (sd.empty())
    for (const auto& p : priors) sd.push_back(p.default_proposal_sd());

  std::vector<Chain> chains(n_chains);
  std::vector<std::size_t> fits(n_chains, 0);
  std::vector<std::exception_ptr> errors(n_chains);

#pragma omp parallel for schedule(static, 1)
  for (std::size_t k = 0; k < n_chains; ++k) {
    try {
      std::optional<BiasedLikelihood> biased;
      if (config.bias) biased.emplace(model, data, *config.bias, config.residual);
      std::size_t failed = 0;
      auto target = [&](std::span<const double> theta) {
        const double lp = log_prior(priors, theta);
        if (lp == neg_inf) return neg_inf;
        double ll = neg_inf;
        try {
          if (biased) {
            ll = (*biased)(theta.first(t_model));
          } else {
            const double sigma = config.noise_prior ? theta[t_model] : data.sigma_meas;
            if (!(sigma > 0.0)) return neg_inf;
            ll = log_likelihood_nobias(model, theta.first(t_model), data, sigma);
          }
        } catch (const NumericalError&) {
          ++failed;
          return neg_inf;
        } catch (const DomainError&) {
          ++failed;
          return neg_inf;
        }
        return lp + ll;
      };
      const std::uint64_t seed = config.mcmc.seeds.empty() ? config.mcmc.seed + k : config.mcmc.seeds[k];
      chains[k] = metropolis_hastings(target, init, sd, config.mcmc.steps, config.mcmc.burn_in, seed);
      chains[k].names = result.names;
      chains[k].failed_evaluations = failed;
      fits[k] = biased ? biased->fits() : 0;
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }

  for (std::size_t k = 0; k < n_chains; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      std::vector<Chain> done;
      for (std::size_t j = 0; j < n_chains; ++j)
        if (!errors[j]) done.push_back(chains[j]);
      throw ChainFailure("chain " + std::to_string(k) + " aborted: " + e.what(), std::move(done));
    }
  }

  result.chains = std::move(chains);
  for (std::size_t k = 0; k < n_chains; ++k) {
    result.bias_fits += fits[k];
    result.failed_evaluations += result.chains[k].failed_evaluations;
  }
  result.summary = summarize(result.chains);
  result.theta_map = map_estimate(result.chains);

  if (config.bias) {
    BiasedLikelihood final_fit(model, data, *config.bias, config.residual);
    result.bias_fit = final_fit.fit(std::span<const double>(result.theta_map).first(t_model));
    result.bias_fits += final_fit.fits();
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

PredictiveBand fitted_response(const CalibrationResult& result, const ForwardModel& model, const Dataset& data,
                               const Points& x) {
  return sweep(result, model, data, x, true);
}

PredictiveBand serial::fitted_response(const CalibrationResult& result, const ForwardModel& model,
                                       const Dataset& data, const Points& x) {
  return sweep(result, model, data, x, false);
}

PredictiveBand bias_corrected_response(const CalibrationResult& result, const ForwardModel& model,
                                       const Dataset& data, const Points& x, const Points& eta) {
  if (!result.bias_fit) throw ConfigError("bias_corrected_response: no bias fit (method nobias)");
  if (x.rows() == 0) throw ConfigError("bias_corrected_response: empty query grid");
  const ResidualSetup& setup = result.config.residual;
  if (setup.extended && eta.cols() == 0) throw ConfigError("bias_corrected_response: eta required for extended fit");
  if (!setup.extended && eta.cols() != 0)
    throw ConfigError("bias_corrected_response: eta supplied but the fit is not extended");
  if (setup.extended && eta.rows() != x.rows()) throw DimensionError("bias_corrected_response: x and eta rows differ");

  Points raw = x;
  if (setup.extended) {
    raw.resize(x.rows(), x.cols() + eta.cols());
    raw << x, eta;
  }
  const Points inputs = setup.scaling.apply(raw);
  const Prediction p = predict(*result.bias_fit, inputs);
  const std::vector<double> theta(result.theta_map.begin(),
                                  result.theta_map.begin() + static_cast<std::ptrdiff_t>(model.parameter_count()));
  const Eigen::VectorXd f = model_outputs(model, theta, x);
  const double s = setup.residual_scale;

  PredictiveBand b;
  b.x = x;
  b.eta = setup.extended ? eta : Points(x.rows(), 0);
  b.kind = PredictiveBand::Kind::bias_corrected;
  b.mean = f + p.mean / s;
  b.sd = (p.variance().array() / (s * s) + data.sigma_meas * data.sigma_meas).sqrt();
  return b;
}

}  // namespace biascal
