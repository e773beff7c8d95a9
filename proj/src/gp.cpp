#include "biascal/gp.hpp"

#include "biascal/error.hpp"
#include "biascal/ogp.hpp"
#include "biascal/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace biascal {

namespace {

constexpr double log_two_pi = 1.8378770664093454835606594728112;
constexpr double box_penalty = 1e3;

std::vector<double> current_values(const BiasModel& bias) {
  std::vector<double> out;
  for (const auto& p : free_parameters(bias)) out.push_back(p.value);
  return out;
}

void check_training(const Points& x, const Eigen::VectorXd& r) {
  if (x.rows() == 0) throw ConfigError("gp: no training inputs");
  if (x.rows() != r.size())
    throw DimensionError("gp: " + std::to_string(x.rows()) + " inputs but " + std::to_string(r.size()) + " residuals");
}

Eigen::VectorXd kernel_noise(const BiasModel& bias, const Points& x) {
  const NoiseSplit parts = split_noise(bias.kernel);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(x.rows());
  if (parts.noise)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      d[i] = detail::eval_entry_record(*parts.noise, row(x, i), row(x, i), true);
  return d;
}

double hyperprior_term(const BiasModel& bias, const std::string& name, double value) {
  const auto it = bias.hyperpriors.find(name);
  if (it == bias.hyperpriors.end()) return 0.0;
  if (!(value > 0.0)) return -std::numeric_limits<double>::infinity();
  const double z = (std::log(value) - it->second.mu) / it->second.sigma;
  return -0.5 * z * z - std::log(value * it->second.sigma) - 0.5 * log_two_pi;
}

double cholesky_log_likelihood(const Factorization& f, const Eigen::VectorXd& centered) {
  const Eigen::VectorXd v = f.llt.matrixL().solve(centered);
  const double log_det_half = f.llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * v.squaredNorm() - log_det_half - 0.5 * static_cast<double>(centered.size()) * log_two_pi;
}

// Quantities that make the likelihood O(n) per amplitude value:
// C(s) = s·S + ν·I with S = Q diag(λ) Qᵀ.
struct SpectralProblem {
  Eigen::VectorXd lambda;
  Eigen::VectorXd projected_sq;  // (Qᵀ r̃)²
  double nu;
  double unit_trace;
  double jitter;
  int power;

  [[nodiscard]] std::optional<double> log_likelihood(double amplitude) const {
    const double scale = std::pow(amplitude, power);
    const auto n = lambda.size();
    const double trace = scale * unit_trace + static_cast<double>(n) * nu;
    for (double j : jitter_ladder(jitter, trace, n)) {
      const Eigen::ArrayXd mu = scale * lambda.array() + nu + j;
      const double top = mu.maxCoeff();
      if (!(top > 0.0) || !(mu.minCoeff() > static_cast<double>(n) * std::numeric_limits<double>::epsilon() * top))
        continue;
      const double quad = (projected_sq.array() / mu).sum();
      return -0.5 * quad - 0.5 * mu.log().sum() - 0.5 * static_cast<double>(n) * log_two_pi;
    }
    return std::nullopt;
  }
};

SpectralProblem prepare_spectral(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r,
                                 FitWorkspace& ws) {
  const auto sp = scale_parameter(*split_noise(bias.kernel).signal);
  const double one = 1.0;
  const BiasModel unit = with_free_values(bias, std::span<const double>(&one, 1));
  const Eigen::MatrixXd s = signal_covariance(unit, x, &ws.grams);
  SpectralCache& c = ws.spectral;
  if (c.unit.rows() != s.rows() || c.unit.cols() != s.cols() || c.unit != s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.info() != Eigen::Success) throw NumericalError("gp: eigendecomposition failed");
    c.unit = s;
    c.eigenvalues = es.eigenvalues();
    c.eigenvectors = es.eigenvectors();
    ++c.decompositions;
  }
  const Eigen::VectorXd centered = r.array() - bias.mean.value;
  SpectralProblem p;
  p.lambda = c.eigenvalues;
  p.projected_sq = (c.eigenvectors.transpose() * centered).array().square();
  p.nu = noise_variance(bias, x)[0];
  p.unit_trace = s.trace();
  p.jitter = bias.jitter;
  p.power = sp->power;
  return p;
}

// Rows of x collapsed to their distinct values: C = Z S Zᵀ + D with Z the
// 0/1 incidence matrix, D diagonal (noise depends on the input only).
struct GroupedInputs {
  Points unique;
  std::vector<Eigen::Index> group;  // row -> index into unique
};

GroupedInputs group_rows(const Points& x) {
  GroupedInputs g;
  std::map<std::vector<double>, Eigen::Index> seen;
  std::vector<Eigen::Index> first;
  g.group.resize(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<double> key(x.row(i).data(), x.row(i).data() + x.cols());
    const auto [it, inserted] = seen.emplace(std::move(key), static_cast<Eigen::Index>(first.size()));
    if (inserted) first.push_back(i);
    g.group[static_cast<std::size_t>(i)] = it->second;
  }
  g.unique.resize(static_cast<Eigen::Index>(first.size()), x.cols());
  for (std::size_t k = 0; k < first.size(); ++k) g.unique.row(static_cast<Eigen::Index>(k)) = x.row(first[k]);
  return g;
}

// Woodbury / determinant-lemma evaluation over the distinct inputs. Returns
// nullopt when the dense route should decide instead (indefinite S, D <= 0).
std::optional<double> woodbury_log_likelihood(const BiasModel& bias, const GroupedInputs& g,
                                             const Eigen::VectorXd& centered, GramCache* cache) {
  const Eigen::MatrixXd s = signal_covariance(bias, g.unique, cache);
  const Eigen::VectorXd du = noise_variance(bias, g.unique);
  const auto n = static_cast<Eigen::Index>(g.group.size());
  const Eigen::Index m = s.rows();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd lambda = es.eigenvalues();
  const double top = std::max(0.0, lambda.maxCoeff());
  if (lambda.minCoeff() < -1e-10 * top) return std::nullopt;
  const Eigen::MatrixXd root = es.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();

  double trace = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index k = g.group[static_cast<std::size_t>(i)];
    trace += s(k, k) + du[k];
  }
  for (double j : jitter_ladder(bias.jitter, trace, n)) {
    const Eigen::VectorXd d = du.array() + j;
    if (!(d.array() > 0.0).all()) continue;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    double quad = 0.0;
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index k = g.group[static_cast<std::size_t>(i)];
      a[k] += 1.0 / d[k];
      b[k] += centered[i] / d[k];
      quad += centered[i] * centered[i] / d[k];
      log_det += std::log(d[k]);
    }
    Eigen::MatrixXd inner = root.transpose() * a.asDiagonal() * root;
    inner.diagonal().array() += 1.0;
    const Eigen::LLT<Eigen::MatrixXd> llt(inner);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::VectorXd c = root.transpose() * b;
    const Eigen::VectorXd w = llt.matrixL().solve(c);
    quad -= w.squaredNorm();
    log_det += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * quad - 0.5 * log_det - 0.5 * static_cast<double>(n) * log_two_pi;
  }
  return std::nullopt;
}

}  // namespace

void BiasModel::validate() const {
  biascal::validate(kernel);
  if (!(jitter >= 0.0)) throw ConfigError("bias: jitter must be >= 0");
  if (!(noise_sd >= 0.0)) throw ConfigError("bias: noise_sd must be >= 0");
  if (!std::isfinite(mean.value)) throw ConfigError("bias: mean must be finite");
  if (mean.free && (!(mean.lo < mean.hi) || mean.value < mean.lo || mean.value > mean.hi))
    throw ConfigError("bias: mean bounds invalid");
  if (orthogonal && anchors.rows() == 0) throw ConfigError("bias: orthogonal model requires anchors");
  for (const auto& [name, h] : hyperpriors)
    if (!(h.sigma > 0.0)) throw ConfigError("bias: hyperprior '" + name + "' needs sigma > 0");
}

std::vector<FreeParameter> free_parameters(const BiasModel& bias) {
  std::vector<FreeParameter> out;
  if (bias.mean.free) out.push_back({"mean", bias.mean.value, bias.mean.lo, bias.mean.hi, false});
  for (auto& p : free_parameters(bias.kernel)) out.push_back(std::move(p));
  return out;
}

BiasModel with_free_values(const BiasModel& bias, std::span<const double> values) {
  BiasModel out = bias;
  std::size_t offset = 0;
  if (bias.mean.free) {
    if (values.empty()) throw DimensionError("bias: missing mean value");
    out.mean.value = values[0];
    offset = 1;
  }
  out.kernel = with_free_values(bias.kernel, values.subspan(offset));
  return out;
}

double log_hyperprior(const BiasModel& bias) {
  double s = 0.0;
  for (const auto& p : free_parameters(bias)) s += hyperprior_term(bias, p.name, p.value);
  return s;
}

Eigen::MatrixXd signal_covariance(const BiasModel& bias, const Points& x, GramCache* cache,
                                  std::optional<std::string>* warning) {
  const NoiseSplit parts = split_noise(bias.kernel);
  if (!parts.signal) return Eigen::MatrixXd::Zero(x.rows(), x.rows());
  if (!bias.orthogonal) return gram(*parts.signal, x, cache);
  OrthogonalGram g = orthogonal_gram(*parts.signal, bias.sensitivities, bias.anchors, x, cache);
  if (warning && g.warning) *warning = g.warning;
  return std::move(g.matrix);
}

Eigen::MatrixXd signal_covariance(const BiasModel& bias, const Points& x, const Points& xp, GramCache* cache) {
  if (&x == &xp) return signal_covariance(bias, x, cache);
  const NoiseSplit parts = split_noise(bias.kernel);
  if (!parts.signal) return Eigen::MatrixXd::Zero(x.rows(), xp.rows());
  if (!bias.orthogonal) return gram(*parts.signal, x, xp, cache);
  return orthogonal_gram(*parts.signal, bias.sensitivities, bias.anchors, x, xp, cache).matrix;
}

Eigen::VectorXd noise_variance(const BiasModel& bias, const Points& x) {
  return kernel_noise(bias, x).array() + bias.noise_sd * bias.noise_sd;
}

Eigen::MatrixXd training_covariance(const BiasModel& bias, const Points& x, GramCache* cache,
                                    std::optional<std::string>* warning) {
  Eigen::MatrixXd c = signal_covariance(bias, x, cache, warning);
  c.diagonal() += noise_variance(bias, x);
  return c;
}

std::vector<double> jitter_ladder(double configured, double trace, Eigen::Index n) {
  std::vector<double> out{configured};
  const double t = trace / static_cast<double>(n);
  if (t > 0.0 && std::isfinite(t))
    for (int e = -10; e <= -4; ++e) out.push_back(std::max(configured, std::pow(10.0, e) * t));
  return out;
}

std::optional<Factorization> factorize(const Eigen::MatrixXd& c, double jitter) {
  for (double j : jitter_ladder(jitter, c.trace(), c.rows())) {
    Factorization f;
    Eigen::MatrixXd a = c;
    a.diagonal().array() += j;
    f.llt.compute(a);
    if (f.llt.info() != Eigen::Success) continue;
    const Eigen::VectorXd d = f.llt.matrixLLT().diagonal();
    if (!d.allFinite() || (d.array() <= 0.0).any()) continue;
    f.jitter = j;
    return f;
  }
  return std::nullopt;
}

double log_marginal_likelihood(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r, GramCache* cache) {
  check_training(x, r);
  const auto f = factorize(training_covariance(bias, x, cache), bias.jitter);
  if (!f) throw NumericalError("gp: covariance not positive definite after jitter escalation", current_values(bias));
  return cholesky_log_likelihood(*f, r.array() - bias.mean.value);
}

bool spectral_applicable(const BiasModel& bias, const Points& x) {
  if (bias.mean.free || free_parameters(bias.kernel).size() != 1) return false;
  const NoiseSplit parts = split_noise(bias.kernel);
  if (!parts.signal || !scale_parameter(*parts.signal)) return false;
  const Eigen::VectorXd nv = noise_variance(bias, x);
  return (nv.array() == nv[0]).all();
}

double spectral_log_likelihood(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r,
                               FitWorkspace& workspace) {
  check_training(x, r);
  if (!spectral_applicable(bias, x)) throw ConfigError("gp: spectral route not applicable to this bias model");
  const SpectralProblem p = prepare_spectral(bias, x, r, workspace);
  const auto ll = p.log_likelihood(free_parameters(bias.kernel)[0].value);
  if (!ll) throw NumericalError("gp: covariance not positive definite after jitter escalation", current_values(bias));
  return *ll;
}

std::optional<double> grouped_log_likelihood(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r,
                                             GramCache* cache) {
  check_training(x, r);
  const GroupedInputs g = group_rows(x);
  const Eigen::VectorXd centered = r.array() - bias.mean.value;
  return woodbury_log_likelihood(bias, g, centered, cache);
}

MapSearch search_map(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r, FitWorkspace* workspace,
                     const FitOptions& options) {
  check_training(x, r);
  FitWorkspace local;
  FitWorkspace& ws = workspace ? *workspace : local;
  const std::vector<FreeParameter> free = free_parameters(bias);
  if (free.empty())
    return {bias, log_marginal_likelihood(bias, x, r, &ws.grams), log_hyperprior(bias), false, 1, false};

  const auto dim = static_cast<Eigen::Index>(free.size());
  Eigen::VectorXd lo(dim);
  Eigen::VectorXd hi(dim);
  Eigen::VectorXd z0(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const auto& p = free[static_cast<std::size_t>(k)];
    lo[k] = p.log_scale ? std::log(p.lo) : p.lo;
    hi[k] = p.log_scale ? std::log(p.hi) : p.hi;
    z0[k] = std::clamp(p.log_scale ? std::log(p.value) : p.value, lo[k], hi[k]);
  }
  auto natural = [&](const Eigen::VectorXd& z) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (Eigen::Index k = 0; k < dim; ++k)
      v[static_cast<std::size_t>(k)] = free[static_cast<std::size_t>(k)].log_scale ? std::exp(z[k]) : z[k];
    return v;
  };

  const bool spectral = options.allow_spectral && spectral_applicable(bias, x);
  std::optional<SpectralProblem> problem;
  if (spectral) problem = prepare_spectral(bias, x, r, ws);
  std::optional<GroupedInputs> groups;
  if (!spectral && options.allow_grouped) {
    groups = group_rows(x);
    if (2 * groups->unique.rows() > x.rows()) groups.reset();
  }

  // Log-likelihood and log-hyperprior at a point inside the box.
  auto evaluate = [&](const Eigen::VectorXd& z) -> std::pair<double, double> {
    const std::vector<double> v = natural(z);
    constexpr double fail = -std::numeric_limits<double>::infinity();
    if (problem) {
      const auto ll = problem->log_likelihood(v[0]);
      return {ll.value_or(fail), hyperprior_term(bias, free[0].name, v[0])};
    }
    const BiasModel candidate = with_free_values(bias, v);
    if (groups) {
      const Eigen::VectorXd centered = r.array() - candidate.mean.value;
      if (const auto ll = woodbury_log_likelihood(candidate, *groups, centered, &ws.grams))
        return {*ll, log_hyperprior(candidate)};
    }
    const auto f = factorize(training_covariance(candidate, x, &ws.grams), candidate.jitter);
    if (!f) return {fail, 0.0};
    return {cholesky_log_likelihood(*f, r.array() - candidate.mean.value), log_hyperprior(candidate)};
  };
  std::size_t evaluations = 0;
  auto objective = [&](const Eigen::VectorXd& z) {
    ++evaluations;
    const Eigen::VectorXd zc = z.cwiseMax(lo).cwiseMin(hi);
    const auto [ll, hp] = evaluate(zc);
    const double total = ll + hp;
    if (!std::isfinite(total)) return std::numeric_limits<double>::infinity();
    return -total + box_penalty * (z - zc).squaredNorm();
  };

  std::vector<Eigen::VectorXd> starts{z0};
  for (const auto& u : optimize::halton(static_cast<std::size_t>(dim), options.restarts))
    starts.push_back(lo.array() + u.array() * (hi - lo).array());
  const Eigen::VectorXd step = 0.1 * (hi - lo);
  const std::size_t max_iterations =
      options.max_iterations ? options.max_iterations : 200 + 100 * static_cast<std::size_t>(dim);

  Eigen::VectorXd best;
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const auto m = optimize::nelder_mead(objective, s, step, options.tolerance, max_iterations);
    if (m.value < best_value) {
      best_value = m.value;
      best = m.x;
    }
  }
  if (!std::isfinite(best_value))
    throw NumericalError("gp: every optimizer restart failed to factorize the covariance", current_values(bias));

  const Eigen::VectorXd zb = best.cwiseMax(lo).cwiseMin(hi);
  const auto [ll, hp] = evaluate(zb);
  return {with_free_values(bias, natural(zb)), ll, hp, spectral, evaluations, groups.has_value()};
}

FittedGP condition(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r, GramCache* cache) {
  check_training(x, r);
  std::optional<std::string> warning;
  const auto f = factorize(training_covariance(bias, x, cache, &warning), bias.jitter);
  if (!f) throw NumericalError("gp: covariance not positive definite after jitter escalation", current_values(bias));
  const Eigen::VectorXd centered = r.array() - bias.mean.value;
  FittedGP out{bias, x, r, f->llt, f->llt.solve(centered), cholesky_log_likelihood(*f, centered), f->jitter, {}};
  if (warning) out.warnings.push_back(*warning);
  if (!std::isfinite(out.log_likelihood)) throw NumericalError("gp: non-finite log-likelihood", current_values(bias));
  return out;
}

FittedGP fit_map(const BiasModel& bias, const Points& x, const Eigen::VectorXd& r, FitWorkspace* workspace,
                 const FitOptions& options) {
  FitWorkspace local;
  FitWorkspace& ws = workspace ? *workspace : local;
  const MapSearch m = search_map(bias, x, r, &ws, options);
  return condition(m.bias, x, r, &ws.grams);
}

Prediction predict(const FittedGP& fit, const Points& query, GramCache* cache) {
  if (query.rows() == 0) throw ConfigError("predict: no query points");
  if (query.cols() != fit.inputs.cols())
    throw DimensionError("predict: query dimension " + std::to_string(query.cols()) + " but training dimension " +
                         std::to_string(fit.inputs.cols()));
  const Eigen::MatrixXd kq = signal_covariance(fit.bias, query, fit.inputs, cache);
  Prediction p;
  p.mean = (kq * fit.alpha).array() + fit.bias.mean.value;
  Eigen::MatrixXd kqq = signal_covariance(fit.bias, query, cache);
  kqq.diagonal() += kernel_noise(fit.bias, query);
  const Eigen::MatrixXd v = fit.factor.matrixL().solve(kq.transpose());
  Eigen::MatrixXd cov = kqq - v.transpose() * v;
  p.covariance = 0.5 * (cov + cov.transpose());
  const double tol = 1e-10 * std::max(1.0, kqq.diagonal().maxCoeff());
  for (Eigen::Index i = 0; i < p.covariance.rows(); ++i) {
    double& d = p.covariance(i, i);
    if (d >= 0.0) continue;
    if (d < -tol) throw NumericalError("predict: predictive variance " + std::to_string(d) + " below tolerance");
    d = 0.0;
    ++p.clipped;
  }
  return p;
}

}  // namespace biascal
