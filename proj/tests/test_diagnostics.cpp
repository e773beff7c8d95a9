#include "biascal/diagnostics.hpp"
#include "biascal/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace biascal;

namespace {

Eigen::VectorXd normals(testing::Gen& g, Eigen::Index n, double mu = 0.0, double sd = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g.normal(mu, sd);
  return v;
}

Chain chain_of(const Eigen::VectorXd& v) {
  Chain c;
  c.names = {"theta"};
  c.samples = v;
  c.log_posterior = Eigen::VectorXd::Zero(v.size());
  return c;
}

// Direct textbook formula, no shared code with the library.
double rhat_oracle(const std::vector<Eigen::VectorXd>& chains) {
  const double m = static_cast<double>(chains.size());
  const double n = static_cast<double>(chains[0].size());
  double grand = 0.0, w = 0.0;
  std::vector<double> means;
  for (const auto& c : chains) {
    const double mu = c.mean();
    means.push_back(mu);
    grand += mu / m;
    w += (c.array() - mu).square().sum() / (n - 1.0) / m;
  }
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  return std::sqrt(((n - 1.0) / n * w + b / n) / w);
}

// Narrowest window by brute force over all start indices.
std::pair<double, double> hdi_oracle(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()) - 1e-9));
  std::pair<double, double> best{v.front(), v.back()};
  for (std::size_t i = 0; i + k <= v.size(); ++i)
    if (v[i + k - 1] - v[i] < best.second - best.first) best = {v[i], v[i + k - 1]};
  return best;
}

double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("hdi examples") {
  CHECK(hdi(std::vector<double>(50, 2.5)) == std::pair<double, double>{2.5, 2.5});

  testing::Gen g(61);
  std::vector<double> u(100000);
  for (auto& x : u) x = g.uniform(0.0, 1.0);
  const auto [ul, uh] = hdi(u);
  CHECK(std::abs((uh - ul) - 0.94) <= 0.01);

  // stratified draws Φ⁻¹((i + U)/n), shuffled
  std::vector<double> z(100000);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = normal_quantile((static_cast<double>(i) + g.uniform(0.0, 1.0)) / 1e5);
  std::shuffle(z.begin(), z.end(), g.engine());
  const auto [zl, zh] = hdi(z);
  CHECK(std::abs(zl + 1.88) <= 0.05);
  CHECK(std::abs(zh - 1.88) <= 0.05);

  CHECK_THROWS_AS((void)hdi(std::vector<double>(5, 1.0)), ConfigError);
  CHECK_THROWS_AS((void)hdi(u, 1.0), ConfigError);
}

TEST_CASE("property: hdi matches brute force and ignores order") {
  testing::Gen g(62);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(g.integer(10, 300)));
    for (auto& x : v) x = trial % 2 ? g.normal() : std::exp(g.normal());
    const double p = g.uniform(0.5, 0.99);
    CHECK((hdi(v, p).second - hdi(v, p).first) == doctest::Approx(hdi_oracle(v, p).second - hdi_oracle(v, p).first));
    auto shuffled = v;
    std::shuffle(shuffled.begin(), shuffled.end(), g.engine());
    CHECK(hdi(shuffled, p) == hdi(v, p));
  }
}

TEST_CASE("Gelman-Rubin examples") {
  testing::Gen g(63);
  const Eigen::VectorXd a = normals(g, 1000);
  CHECK(gelman_rubin({a, a}) == doctest::Approx(std::sqrt(999.0 / 1000.0)).epsilon(1e-12));
  CHECK(std::abs(gelman_rubin({normals(g, 10000), normals(g, 10000)}) - 1.0) <= 0.01);
  CHECK(gelman_rubin({normals(g, 1000, 0.0), normals(g, 1000, 10.0)}) > 3.0);
  const Eigen::VectorXd flat = Eigen::VectorXd::Constant(100, 4.0);
  CHECK(gelman_rubin({flat, flat}) == doctest::Approx(std::sqrt(99.0 / 100.0)).epsilon(1e-12));
}

TEST_CASE("Gelman-Rubin splits a single chain") {
  testing::Gen g(64);
  Eigen::VectorXd v(2000);
  v << normals(g, 1000, 0.0), normals(g, 1000, 5.0);
  CHECK(gelman_rubin({v}) == doctest::Approx(rhat_oracle({v.head(1000), v.tail(1000)})).epsilon(1e-12));
}

TEST_CASE("property: Gelman-Rubin oracle and affine invariance") {
  testing::Gen g(65);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = static_cast<std::size_t>(g.integer(2, 5));
    const Eigen::Index n = g.integer(10, 500);
    std::vector<Eigen::VectorXd> chains;
    for (std::size_t k = 0; k < m; ++k) chains.push_back(normals(g, n, g.uniform(-1.0, 1.0), g.uniform(0.5, 2.0)));
    const double r = gelman_rubin(chains);
    CHECK(r == doctest::Approx(rhat_oracle(chains)).epsilon(1e-12));
    double a = g.uniform(-100.0, 100.0);
    if (std::abs(a) < 0.1) a = 3.0;
    const double b = g.uniform(-1e3, 1e3);
    auto mapped = chains;
    for (auto& c : mapped) c = (a * c.array() + b).matrix();
    CHECK(std::abs(gelman_rubin(mapped) - r) <= 1e-10);
  }
}

TEST_CASE("effective sample size and Monte Carlo error") {
  testing::Gen g(66);
  const Eigen::VectorXd iid = normals(g, 10000);
  const double ess = effective_sample_size({iid});
  CHECK(ess >= 8000.0);
  CHECK(ess <= 12000.0);
  const double sd = std::sqrt((iid.array() - iid.mean()).square().sum() / 9999.0);
  const MonteCarloError e = mcse(iid);
  CHECK(e.mean == doctest::Approx(sd / 100.0).epsilon(0.2));
  CHECK(e.sd == doctest::Approx(e.mean / std::sqrt(2.0)).epsilon(1e-12));

  const Eigen::VectorXd flat = Eigen::VectorXd::Constant(500, 1.5);
  CHECK(effective_sample_size({flat}) == 1.0);
  CHECK(mcse(flat).mean == 0.0);
  CHECK(mcse(flat).sd == 0.0);

  const double rho = 0.9;
  const Eigen::Index n = 100000;
  Eigen::VectorXd ar(n);
  ar[0] = g.normal(0.0, 1.0 / std::sqrt(1.0 - rho * rho));
  for (Eigen::Index i = 1; i < n; ++i) ar[i] = rho * ar[i - 1] + g.normal();
  const double expected = static_cast<double>(n) * (1.0 - rho) / (1.0 + rho);
  CHECK(effective_sample_size({ar}) == doctest::Approx(expected).epsilon(0.3));

  CHECK_THROWS_AS((void)mcse(Eigen::VectorXd::Zero(10)), ConfigError);
}

TEST_CASE("summaries") {
  testing::Gen g(67);
  const Chain a = chain_of(normals(g, 3000, 3.33, 0.01));
  const Chain b = chain_of(normals(g, 3000, 3.33, 0.01));
  const PosteriorSummary s = summarize({a, b});
  const ParameterSummary r = s.at("theta");
  CHECK(std::abs(r.mean - 3.33) <= 0.005);
  CHECK(std::abs(r.sd - 0.01) <= 0.001);
  CHECK(r.hdi_3 < r.mean);
  CHECK(r.mean < r.hdi_97);
  CHECK(r.mcse_mean <= r.sd);
  CHECK(std::abs(r.r_hat - 1.0) <= 0.01);

  // pooled mean in concatenation order
  double sum = 0.0;
  for (const Chain* c : {&a, &b})
    for (Eigen::Index i = 0; i < c->samples.rows(); ++i) sum += c->samples(i, 0);
  CHECK(r.mean == sum / 6000.0);

  const Chain flat = chain_of(Eigen::VectorXd::Constant(100, 7.0));
  const ParameterSummary f = summarize({flat, flat}).rows[0];
  CHECK(f.mean == 7.0);
  CHECK(f.sd == 0.0);
  CHECK(f.hdi_3 == 7.0);
  CHECK(f.hdi_97 == 7.0);

  CHECK_THROWS_AS((void)s.at("missing"), ConfigError);
  CHECK_THROWS_AS((void)summarize({}), ConfigError);
}

TEST_CASE("summary of a conjugate Metropolis-Hastings run") {
  const LogTarget target = [](std::span<const double> t) {
    return -0.5 * t[0] * t[0] - 0.5 * (1.0 - t[0]) * (1.0 - t[0]);
  };
  std::vector<Chain> chains{metropolis_hastings(target, {0.0}, {1.0}, 20000, 500, 1),
                            metropolis_hastings(target, {1.0}, {1.0}, 20000, 500, 2)};
  const ParameterSummary r = summarize(chains).rows[0];
  CHECK(std::abs(r.mean - 0.5) <= 3.0 * r.mcse_mean);
  CHECK(r.r_hat < 1.01);
}
