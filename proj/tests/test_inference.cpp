#include "biascal/error.hpp"
#include "biascal/inference.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

using namespace biascal;
using testing::column;

namespace {

const double log2pi = std::log(2.0 * M_PI);

Dataset rows(const Points& x, const Eigen::VectorXd& y, double sigma = 0.0) {
  Dataset d;
  d.x = x;
  d.y = y;
  d.series.assign(static_cast<std::size_t>(y.size()), 0);
  d.sigma_meas = sigma;
  return d;
}

FunctionModel identity_model() {
  return {"id", {"theta"}, [](std::span<const double> t, std::span<const double>) { return t[0]; }};
}

BiasSpec pedagogical_koh() {
  BiasModel b(Kernel::matern32(Hyperparameter(1.0, 1e-6, 1e3), 0.5 / std::sqrt(3.0)));
  b.noise_sd = pedagogical::noise_sd;
  return BiasSpec(b);
}

double mean(const Eigen::VectorXd& v) { return v.mean(); }
double variance(const Eigen::VectorXd& v) { return (v.array() - v.mean()).square().sum() / (v.size() - 1.0); }

// Exact acceptance of a Gaussian walk with SD s under U(0,1), by midpoint quadrature.
double uniform_acceptance(double s) {
  const int n = 4000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    acc += 0.5 * (std::erf((1.0 - x) / (s * std::sqrt(2.0))) - std::erf(-x / (s * std::sqrt(2.0)))) / n;
  }
  return acc;
}

}  // namespace

TEST_CASE("prior log densities") {
  const Prior n{"a", NormalPrior{0.0, 1.0}};
  CHECK(n.log_density(0.0) == doctest::Approx(-0.91894).epsilon(1e-5));
  const Prior u{"s", UniformPrior{0.0, 0.8}};
  CHECK(u.log_density(0.9) == -std::numeric_limits<double>::infinity());
  CHECK(u.log_density(0.4) == doctest::Approx(-std::log(0.8)));
  const Prior ln{"E", LogNormalPrior{24.3, 0.2}};
  CHECK(ln.log_density(std::exp(24.3)) == doctest::Approx(-24.3 - 0.5 * std::log(2.0 * M_PI * 0.04)).epsilon(1e-12));
  CHECK(ln.log_density(-1.0) == -std::numeric_limits<double>::infinity());
  CHECK(ln.center() == doctest::Approx(std::exp(24.3)));

  const std::vector<Prior> priors{n, u};
  const std::vector<double> inside{0.0, 0.4};
  const std::vector<double> outside{0.0, 0.9};
  CHECK(log_prior(priors, inside) == doctest::Approx(-0.5 * log2pi - std::log(0.8)));
  CHECK(log_prior(priors, outside) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS((void)log_prior(priors, std::vector<double>{0.0}), DimensionError);
  CHECK_THROWS_AS(Prior({"bad", UniformPrior{1.0, 1.0}}).validate(), ConfigError);
  CHECK_THROWS_AS(Prior({"bad", NormalPrior{0.0, 0.0}}).validate(), ConfigError);
}

TEST_CASE("default proposal scales") {
  CHECK(Prior{"a", NormalPrior{35e9, 5e9}}.default_proposal_sd() == doctest::Approx(5e8));
  CHECK(Prior{"s", UniformPrior{0.0, 0.8}}.default_proposal_sd() == doctest::Approx(0.08));
}

TEST_CASE("no-bias likelihood") {
  const FunctionModel m = identity_model();
  const std::vector<double> theta{1.0};
  CHECK(log_likelihood_nobias(m, theta, rows(column({0, 1, 2}), Eigen::VectorXd::Ones(3)), 1.0) ==
        doctest::Approx(-1.5 * log2pi).epsilon(1e-14));
  CHECK(log_likelihood_nobias(m, theta, rows(column({0}), Eigen::VectorXd::Constant(1, 3.0)), 1.0) ==
        doctest::Approx(-2.0 - 0.5 * log2pi).epsilon(1e-14));
  CHECK_THROWS_AS((void)log_likelihood_nobias(m, theta, rows(column({0}), Eigen::VectorXd::Ones(1)), 0.0),
                  ConfigError);
}

TEST_CASE("no-bias likelihood weights repeated series equally") {
  // duplicating every row doubles the log-likelihood
  PedagogicalModel m;
  const Dataset d = generate_pedagogical(2);
  Dataset twice = d;
  twice.x.resize(2 * d.size(), 1);
  twice.x << d.x, d.x;
  twice.y.resize(2 * d.size());
  twice.y << d.y, d.y;
  twice.series.assign(static_cast<std::size_t>(2 * d.size()), 0);
  std::fill(twice.series.begin() + d.size(), twice.series.end(), 1);
  const std::vector<double> theta{3.3};
  CHECK(log_likelihood_nobias(m, theta, twice, 0.05) ==
        doctest::Approx(2.0 * log_likelihood_nobias(m, theta, d, 0.05)).epsilon(1e-14));
}

TEST_CASE("biased likelihood prefers small smooth residuals") {
  PedagogicalModel m;
  const Dataset d = generate_pedagogical(0);
  const std::vector<double> good{3.6};
  const std::vector<double> bad{0.5};
  const double a = log_likelihood_biased(m, good, d, pedagogical_koh()).first;
  const double b = log_likelihood_biased(m, bad, d, pedagogical_koh()).first;
  CHECK(std::isfinite(a));
  CHECK(a > b);
}

TEST_CASE("zero residuals reduce to the pure-noise model") {
  PedagogicalModel m;
  Dataset d = generate_pedagogical(0);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.y[i] = 2.0 * d.x(i, 0);
  BiasModel b(Kernel::matern32(Hyperparameter(1.0, 1e-6, 1e3), 0.5 / std::sqrt(3.0)));
  b.noise_sd = 0.1;
  const std::vector<double> theta{2.0};
  const auto [ll, fit] = log_likelihood_biased(m, theta, d, BiasSpec(b));
  const double n = static_cast<double>(d.size());
  const double pure = -0.5 * n * std::log(2.0 * M_PI * 0.01);
  // the amplitude floor leaves a residual of order n·1e-6/σ²
  CHECK(std::abs(ll - pure) <= 1e-3);
  CHECK(fit.residuals.isZero(0.0));
}

TEST_CASE("OGP with a constant model equals KOH") {
  const FunctionModel m{"c", {"theta"}, [](std::span<const double>, std::span<const double>) { return 1.0; }};
  const Dataset d = generate_pedagogical(4);
  BiasSpec koh = pedagogical_koh();
  BiasSpec ogp = pedagogical_koh();
  ogp.model.orthogonal = true;
  Points anchors(21, 1);
  for (Eigen::Index i = 0; i < 21; ++i) anchors(i, 0) = 0.05 * static_cast<double>(i);
  ogp.model.anchors = anchors;
  ogp.fd_steps = {1e-3};
  const std::vector<double> theta{2.0};
  const double a = log_likelihood_biased(m, theta, d, koh).first;
  const double b = log_likelihood_biased(m, theta, d, ogp).first;
  CHECK(a == doctest::Approx(b).epsilon(1e-10));
}

TEST_CASE("property: KOH likelihood is invariant under row permutation") {
  testing::Gen g(51);
  PedagogicalModel m;
  const Dataset d = generate_pedagogical(9);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d.size()));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), g.engine());
    Dataset p = d;
    for (std::size_t i = 0; i < order.size(); ++i) {
      p.x(static_cast<Eigen::Index>(i), 0) = d.x(order[i], 0);
      p.y[static_cast<Eigen::Index>(i)] = d.y[order[i]];
    }
    const std::vector<double> theta{g.uniform(2.0, 5.0)};
    CHECK(log_likelihood_biased(m, theta, p, pedagogical_koh()).first ==
          doctest::Approx(log_likelihood_biased(m, theta, d, pedagogical_koh()).first).epsilon(1e-8));
  }
}

TEST_CASE("Metropolis-Hastings on a conjugate normal posterior") {
  const FunctionModel m = identity_model();
  const Dataset d = rows(column({0}), Eigen::VectorXd::Ones(1));
  const std::vector<Prior> priors{{"theta", NormalPrior{0.0, 1.0}}};
  const LogTarget target = [&](std::span<const double> t) {
    return log_prior(priors, t) + log_likelihood_nobias(m, t, d, 1.0);
  };
  const Chain c = metropolis_hastings(target, {0.0}, {1.0}, 20000, 1000, 11);
  CHECK(c.samples.rows() == 20000);
  CHECK(std::abs(mean(c.samples.col(0)) - 0.5) <= 0.05);
  CHECK(std::abs(variance(c.samples.col(0)) - 0.5) <= 0.1);
  CHECK(c.acceptance_rate > 0.0);
  CHECK(c.acceptance_rate < 1.0);
  CHECK(std::abs(map_estimate({c})[0] - 0.5) <= 0.1);

  // stored log-posterior is the target at the stored sample
  for (Eigen::Index i = 0; i < 100; ++i) {
    const double t = c.samples(i, 0);
    CHECK(c.log_posterior[i] == target(std::span<const double>(&t, 1)));
  }
}

TEST_CASE("Metropolis-Hastings is deterministic per seed") {
  const LogTarget target = [](std::span<const double> t) { return -0.5 * (t[0] * t[0] + 4.0 * t[1] * t[1]); };
  const Chain a = metropolis_hastings(target, {0.0, 0.0}, {0.5, 0.3}, 2000, 100, 99);
  const Chain b = metropolis_hastings(target, {0.0, 0.0}, {0.5, 0.3}, 2000, 100, 99);
  const Chain c = metropolis_hastings(target, {0.0, 0.0}, {0.5, 0.3}, 2000, 100, 100);
  CHECK(a.samples == b.samples);
  CHECK(a.log_posterior == b.log_posterior);
  CHECK(a.samples != c.samples);
  CHECK(a.seed == 99);
  CHECK(a.burn_in == 100);
}

TEST_CASE("summation order of prior and likelihood does not change acceptance") {
  const LogTarget lik = [](std::span<const double> t) { return -0.5 * (t[0] - 1.3) * (t[0] - 1.3) / 0.7; };
  const std::vector<Prior> priors{{"theta", NormalPrior{0.4, 2.0}}};
  const LogTarget pl = [&](std::span<const double> t) { return log_prior(priors, t) + lik(t); };
  const LogTarget lp = [&](std::span<const double> t) { return lik(t) + log_prior(priors, t); };
  CHECK(metropolis_hastings(pl, {0.0}, {0.8}, 3000, 0, 4).samples ==
        metropolis_hastings(lp, {0.0}, {0.8}, 3000, 0, 4).samples);
}

TEST_CASE("flat target on the unit interval is sampled uniformly") {
  const std::vector<Prior> priors{{"u", UniformPrior{0.0, 1.0}}};
  const LogTarget target = [&](std::span<const double> t) { return log_prior(priors, t); };
  const double sd = 0.5;
  const Chain c = metropolis_hastings(target, {0.5}, {sd}, 10000, 500, 2024);
  CHECK(std::abs(c.acceptance_rate - uniform_acceptance(sd)) <= 0.02);

  std::vector<double> v(c.samples.col(0).data(), c.samples.col(0).data() + c.samples.rows());
  CHECK(*std::min_element(v.begin(), v.end()) >= 0.0);
  CHECK(*std::max_element(v.begin(), v.end()) <= 1.0);
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    dmax = std::max({dmax, (i + 1) / n - v[i], v[i] - i / n});
  // asymptotic Kolmogorov critical value at the 1% level
  CHECK(dmax <= 1.6276 / std::sqrt(n));
}

TEST_CASE("two-point target occupation ratio") {
  // narrow bumps at 0 and 1 with weights 1 : 2
  const double w = 0.1;
  const LogTarget target = [&](std::span<const double> t) {
    const double a = std::exp(-0.5 * t[0] * t[0] / (w * w));
    const double b = 2.0 * std::exp(-0.5 * (t[0] - 1.0) * (t[0] - 1.0) / (w * w));
    return std::log(a + b);
  };
  const Chain c = metropolis_hastings(target, {0.0}, {0.6}, 50000, 1000, 77);
  double left = 0.0, right = 0.0;
  for (Eigen::Index i = 0; i < c.samples.rows(); ++i) (c.samples(i, 0) < 0.5 ? left : right) += 1.0;
  CHECK(std::abs(right / left - 2.0) <= 0.05 * 2.0);
}

TEST_CASE("samples stay inside the prior support") {
  const std::vector<Prior> priors{{"a", UniformPrior{0.0, 0.8}}, {"b", LogNormalPrior{0.0, 0.5}}};
  const LogTarget target = [&](std::span<const double> t) { return log_prior(priors, t) - t[0] * t[1]; };
  const Chain c = metropolis_hastings(target, {0.4, 1.0}, {0.3, 0.5}, 5000, 0, 3);
  for (Eigen::Index i = 0; i < c.samples.rows(); ++i) {
    const double t[2] = {c.samples(i, 0), c.samples(i, 1)};
    CHECK(std::isfinite(log_prior(priors, t)));
  }
}

TEST_CASE("Metropolis-Hastings argument errors") {
  const std::vector<Prior> priors{{"u", UniformPrior{0.0, 1.0}}};
  const LogTarget target = [&](std::span<const double> t) { return log_prior(priors, t); };
  CHECK_THROWS_AS((void)metropolis_hastings(target, {2.0}, {0.1}, 10, 0, 1), ConfigError);
  CHECK_THROWS_AS((void)metropolis_hastings(target, {0.5}, {0.0}, 10, 0, 1), ConfigError);
  CHECK_THROWS_AS((void)metropolis_hastings(target, {0.5}, {0.1, 0.1}, 10, 0, 1), DimensionError);
  CHECK_THROWS_AS((void)metropolis_hastings(target, {0.5}, {0.1}, 0, 0, 1), ConfigError);
}

TEST_CASE("MAP extraction") {
  Chain a;
  a.samples = Eigen::MatrixXd(3, 1);
  a.samples << 10.0, 20.0, 30.0;
  a.log_posterior = Eigen::Vector3d(-3.0, -1.0, -2.0);
  CHECK(map_estimate({a})[0] == 20.0);
  Chain b = a;
  b.samples << 40.0, 50.0, 60.0;
  b.log_posterior = Eigen::Vector3d(-5.0, -4.0, -0.5);
  CHECK(map_estimate({a, b})[0] == 60.0);
  CHECK(map_estimate({b, a})[0] == 60.0);
  CHECK_THROWS_AS((void)map_estimate({}), ConfigError);
}
