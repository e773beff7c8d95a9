#include "biascal/inference.hpp"

#include "biascal/error.hpp"
#include "biascal/ogp.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace biascal {

namespace {

constexpr double log_two_pi = 1.8378770664093454835606594728112;
constexpr double neg_inf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double Prior::log_density(double v) const {
  return std::visit(overloaded{[&](const NormalPrior& p) {
                                 const double z = (v - p.mu) / p.sigma;
                                 return -0.5 * z * z - std::log(p.sigma) - 0.5 * log_two_pi;
                               },
                               [&](const LogNormalPrior& p) {
                                 if (!(v > 0.0)) return neg_inf;
                                 const double z = (std::log(v) - p.mu) / p.sigma;
                                 return -0.5 * z * z - std::log(v) - std::log(p.sigma) - 0.5 * log_two_pi;
                               },
                               [&](const UniformPrior& p) { return (v >= p.a && v <= p.b) ? -std::log(p.b - p.a) : neg_inf; }},
                    distribution);
}

double Prior::center() const {
  return std::visit(overloaded{[](const NormalPrior& p) { return p.mu; },
                               [](const LogNormalPrior& p) { return std::exp(p.mu); },
                               [](const UniformPrior& p) { return 0.5 * (p.a + p.b); }},
                    distribution);
}

double Prior::default_proposal_sd() const {
  return std::visit(overloaded{[](const NormalPrior& p) { return 0.1 * p.sigma; },
                               [](const LogNormalPrior& p) {
                                 const double s2 = p.sigma * p.sigma;
                                 return 0.1 * std::sqrt(std::expm1(s2) * std::exp(2.0 * p.mu + s2));
                               },
                               [](const UniformPrior& p) { return 0.1 * (p.b - p.a); }},
                    distribution);
}

void Prior::validate() const {
  std::visit(overloaded{[&](const NormalPrior& p) {
                          if (!(p.sigma > 0.0) || !std::isfinite(p.mu))
                            throw ConfigError("prior '" + name + "': normal needs finite mu and sigma > 0");
                        },
                        [&](const LogNormalPrior& p) {
                          if (!(p.sigma > 0.0) || !std::isfinite(p.mu))
                            throw ConfigError("prior '" + name + "': lognormal needs finite mu and sigma > 0");
                        },
                        [&](const UniformPrior& p) {
                          if (!(p.a < p.b) || !std::isfinite(p.a) || !std::isfinite(p.b))
                            throw ConfigError("prior '" + name + "': uniform needs a < b");
                        }},
             distribution);
}

double log_prior(const std::vector<Prior>& priors, std::span<const double> theta) {
  if (priors.size() != theta.size())
    throw DimensionError("log_prior: " + std::to_string(priors.size()) + " priors for " +
                         std::to_string(theta.size()) + " parameters");
  double s = 0.0;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    const double v = priors[i].log_density(theta[i]);
    if (v == neg_inf) return neg_inf;
    s += v;
  }
  return s;
}

double log_likelihood_nobias(const ForwardModel& model, std::span<const double> theta, const Dataset& data,
                             double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("log_likelihood_nobias: sigma must be positive");
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double z = (data.y[i] - model.evaluate(theta, row(data.x, i))) / sigma;
    s += -0.5 * z * z;
  }
  return s - static_cast<double>(data.size()) * (std::log(sigma) + 0.5 * log_two_pi);
}

BiasedLikelihood::BiasedLikelihood(const ForwardModel& model, const Dataset& data, BiasSpec spec, ResidualSetup setup)
    : model_(model), data_(data), spec_(std::move(spec)), setup_(std::move(setup)) {
  data_.validate();
  spec_.model.validate();
  inputs_ = bias_inputs(data_, setup_);
  if (spec_.model.orthogonal) {
    const Points& raw = spec_.model.anchors;
    if (raw.cols() != inputs_.cols())
      throw DimensionError("bias: anchors have " + std::to_string(raw.cols()) + " columns but bias inputs have " +
                           std::to_string(inputs_.cols()));
    if (spec_.fd_steps.size() != model_.parameter_count())
      throw ConfigError("bias: one finite-difference step per model parameter required");
    scaled_anchors_ = setup_.scaling.apply(raw);
    anchor_model_inputs_ = raw.leftCols(static_cast<Eigen::Index>(model_.input_dimension()));
  }
}

BiasModel BiasedLikelihood::bias_at(std::span<const double> theta) const {
  BiasModel b = spec_.model;
  b.noise_sd = spec_.model.noise_sd * setup_.residual_scale;
  if (b.orthogonal) {
    b.anchors = scaled_anchors_;
    b.sensitivities = model_gradient_fd(model_, theta, anchor_model_inputs_, spec_.fd_steps).F * setup_.residual_scale;
  }
  return b;
}

double BiasedLikelihood::operator()(std::span<const double> theta) {
  ++fits_;
  const ResidualSet r = residuals(model_, theta, data_, setup_);
  return search_map(bias_at(theta), inputs_, r.values, &workspace_, spec_.fit).log_likelihood;
}

FittedGP BiasedLikelihood::fit(std::span<const double> theta) {
  ++fits_;
  const ResidualSet r = residuals(model_, theta, data_, setup_);
  return fit_map(bias_at(theta), inputs_, r.values, &workspace_, spec_.fit);
}

std::pair<double, FittedGP> log_likelihood_biased(const ForwardModel& model, std::span<const double> theta,
                                                  const Dataset& data, const BiasSpec& bias,
                                                  const ResidualSetup& setup) {
  BiasedLikelihood l(model, data, bias, setup);
  FittedGP f = l.fit(theta);
  const double ll = f.log_likelihood;
  return {ll, std::move(f)};
}

Chain metropolis_hastings(const LogTarget& target, std::vector<double> init, std::vector<double> proposal_sd,
                          std::size_t steps, std::size_t burn_in, std::uint64_t seed) {
  const std::size_t t = init.size();
  if (t == 0) throw ConfigError("metropolis_hastings: empty parameter vector");
  if (proposal_sd.size() != t) throw DimensionError("metropolis_hastings: one proposal SD per parameter required");
  for (double s : proposal_sd)
    if (!(s > 0.0)) throw ConfigError("metropolis_hastings: proposal SDs must be positive");
  if (steps == 0) throw ConfigError("metropolis_hastings: steps must be >= 1");

  double current = target(init);
  if (!std::isfinite(current)) throw ConfigError("metropolis_hastings: initial point outside the support");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Chain c;
  c.samples.resize(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(t));
  c.log_posterior.resize(static_cast<Eigen::Index>(steps));
  c.proposal_sd = proposal_sd;
  c.seed = seed;
  c.burn_in = burn_in;

  std::vector<double> state = std::move(init);
  std::vector<double> proposal(t);
  std::size_t accepted = 0;
  const std::size_t total = burn_in + steps;
  for (std::size_t it = 0; it < total; ++it) {
    for (std::size_t k = 0; k < t; ++k) proposal[k] = state[k] + proposal_sd[k] * normal(rng);
    const double u = uniform(rng);
    double candidate = target(proposal);
    if (std::isnan(candidate)) candidate = neg_inf;
    if (candidate != neg_inf && std::log(u) < candidate - current) {
      state.swap(proposal);
      current = candidate;
      ++accepted;
    }
    if (it >= burn_in) {
      const auto i = static_cast<Eigen::Index>(it - burn_in);
      for (std::size_t k = 0; k < t; ++k) c.samples(i, static_cast<Eigen::Index>(k)) = state[k];
      c.log_posterior[i] = current;
    }
  }
  c.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(total);
  return c;
}

std::vector<double> map_estimate(const std::vector<Chain>& chains) {
  const Chain* best_chain = nullptr;
  Eigen::Index best_row = 0;
  double best = neg_inf;
  for (const auto& c : chains)
    for (Eigen::Index i = 0; i < c.log_posterior.size(); ++i)
      if (best_chain == nullptr || c.log_posterior[i] > best) {
        best = c.log_posterior[i];
        best_chain = &c;
        best_row = i;
      }
  if (!best_chain) throw ConfigError("map_estimate: no samples");
  const Eigen::VectorXd v = best_chain->samples.row(best_row).transpose();
  return {v.data(), v.data() + v.size()};
}

}  // namespace biascal
