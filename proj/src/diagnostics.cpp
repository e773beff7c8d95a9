#include "biascal/diagnostics.hpp"

#include "biascal/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace biascal {

namespace {

double sample_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

std::vector<Eigen::VectorXd> columns(const std::vector<Chain>& chains, Eigen::Index parameter) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& c : chains) out.emplace_back(c.samples.col(parameter));
  return out;
}

}  // namespace

const ParameterSummary& PosteriorSummary::at(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return rows[i];
  throw ConfigError("summary: no parameter '" + name + "'");
}

std::pair<double, double> hdi(std::vector<double> samples, double prob) {
  const std::size_t n = samples.size();
  if (n < 10) throw ConfigError("hdi: at least 10 samples required");
  if (!(prob > 0.0 && prob < 1.0)) throw ConfigError("hdi: probability must lie in (0, 1)");
  std::sort(samples.begin(), samples.end());
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(prob * static_cast<double>(n) - 1e-9)));
  std::size_t best = 0;
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + k <= n; ++i) {
    const double w = samples[i + k - 1] - samples[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {samples[best], samples[best + k - 1]};
}

double gelman_rubin(const std::vector<Eigen::VectorXd>& chains) {
  std::vector<Eigen::VectorXd> parts;
  if (chains.size() == 1) {
    const Eigen::Index h = chains[0].size() / 2;
    parts = {chains[0].head(h), chains[0].tail(h)};
  } else {
    parts = chains;
  }
  if (parts.size() < 2) throw ConfigError("gelman_rubin: at least one chain required");
  Eigen::Index n = std::numeric_limits<Eigen::Index>::max();
  for (const auto& p : parts) n = std::min(n, p.size());
  if (n < 2) throw ConfigError("gelman_rubin: chains too short");
  const auto m = static_cast<double>(parts.size());
  const auto nd = static_cast<double>(n);
  Eigen::VectorXd means(static_cast<Eigen::Index>(parts.size()));
  double w = 0.0;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    const Eigen::VectorXd c = parts[j].head(n);
    means[static_cast<Eigen::Index>(j)] = c.mean();
    w += sample_variance(c);
  }
  w /= m;
  const double b = nd * (means.array() - means.mean()).square().sum() / (m - 1.0);
  const double base = (nd - 1.0) / nd;
  if (b == 0.0) return std::sqrt(base);
  if (w == 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(base + b / (nd * w));
}

double gelman_rubin(const std::vector<Chain>& chains, Eigen::Index parameter) {
  return gelman_rubin(columns(chains, parameter));
}

double effective_sample_size(const std::vector<Eigen::VectorXd>& chains) {
  double total = 0.0;
  double count = 0.0;
  for (const auto& c : chains) {
    total += c.sum();
    count += static_cast<double>(c.size());
  }
  if (count == 0.0) throw ConfigError("effective_sample_size: no samples");
  const double mean = total / count;
  Eigen::Index n = std::numeric_limits<Eigen::Index>::max();
  for (const auto& c : chains) n = std::min(n, c.size());
  std::vector<Eigen::ArrayXd> centred;
  for (const auto& c : chains) centred.push_back(c.array() - mean);

  auto autocovariance = [&](Eigen::Index lag) {
    double s = 0.0;
    for (const auto& c : centred) s += (c.head(n - lag) * c.segment(lag, n - lag)).sum() / static_cast<double>(n);
    return s / static_cast<double>(centred.size());
  };
  const double g0 = autocovariance(0);
  if (!(g0 > 0.0)) return 1.0;
  double tau = -1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t + 1 < n; t += 2) {
    double pair = (autocovariance(t) + autocovariance(t + 1)) / g0;
    if (pair <= 0.0) break;
    pair = std::min(pair, previous);  // initial monotone sequence
    previous = pair;
    tau += 2.0 * pair;
  }
  const double ess = count / std::max(tau, 1.0 / count);
  return std::max(1.0, ess);
}

MonteCarloError mcse(const Eigen::VectorXd& samples) {
  if (samples.size() < 20) throw ConfigError("mcse: at least 20 samples required");
  const double sd = std::sqrt(sample_variance(samples));
  const double ess = effective_sample_size({samples});
  return {sd / std::sqrt(ess), sd / std::sqrt(2.0 * ess)};
}

PosteriorSummary summarize(const std::vector<Chain>& chains) {
  if (chains.empty()) throw ConfigError("summarize: no chains");
  const Eigen::Index t = chains[0].samples.cols();
  PosteriorSummary out;
  out.names = chains[0].names;
  if (out.names.empty())
    for (Eigen::Index k = 0; k < t; ++k) out.names.push_back("theta_" + std::to_string(k));
  for (const auto& c : chains)
    if (c.samples.cols() != t) throw DimensionError("summarize: chains have different parameter counts");
  for (Eigen::Index k = 0; k < t; ++k) {
    std::vector<double> pooled;
    for (const auto& c : chains)
      for (Eigen::Index i = 0; i < c.samples.rows(); ++i) pooled.push_back(c.samples(i, k));
    double sum = 0.0;
    for (double v : pooled) sum += v;
    const double mean = sum / static_cast<double>(pooled.size());
    double ss = 0.0;
    for (double v : pooled) ss += (v - mean) * (v - mean);
    const double sd = pooled.size() > 1 ? std::sqrt(ss / static_cast<double>(pooled.size() - 1)) : 0.0;
    const auto cols = columns(chains, k);
    const double ess = effective_sample_size(cols);
    const auto [lo, hi] = hdi(pooled);
    out.rows.push_back({mean, sd, lo, hi, sd / std::sqrt(ess), sd / std::sqrt(2.0 * ess), gelman_rubin(cols)});
  }
  return out;
}

}  // namespace biascal
