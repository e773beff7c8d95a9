#pragma once

#include "biascal/kernels.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace testing {

// Small seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  double normal(double mu = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mu, sd)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  biascal::Points points(Eigen::Index n, Eigen::Index dim, double a = 0.0, double b = 1.0) {
    biascal::Points p(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < dim; ++k) p(i, k) = uniform(a, b);
    return p;
  }
  Eigen::VectorXd vector(Eigen::Index n, double sd = 1.0) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(0.0, sd);
    return v;
  }
  // A Aᵀ + n·I scaled randomly, always well conditioned
  Eigen::MatrixXd spd(Eigen::Index n) {
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) a(i, j) = normal();
    Eigen::MatrixXd m = a * a.transpose();
    m.diagonal().array() += static_cast<double>(n);
    return m * uniform(0.1, 10.0);
  }
  // Random kernel tree of bounded depth; noise leaves optional.
  biascal::Kernel kernel(int depth, bool noise) {
    using biascal::Kernel;
    // 0-2 signal leaves, 3 noise leaf, 4 product, 5 sum
    std::vector<int> choices{0, 1, 2};
    if (noise) choices.push_back(3);
    if (depth > 0) {
      choices.push_back(4);
      choices.push_back(5);
    }
    switch (choices[static_cast<std::size_t>(integer(0, static_cast<int>(choices.size()) - 1))]) {
      case 0: return Kernel::matern32(uniform(0.2, 2.0), uniform(0.1, 1.0));
      case 1: return Kernel::rbf(uniform(0.2, 2.0), uniform(0.1, 1.0));
      case 2: return Kernel::constant(uniform(0.1, 2.0)) * Kernel::matern32(1.0, uniform(0.1, 1.0));
      case 3: return Kernel::white_noise(uniform(0.0, 0.1));
      case 4: return kernel(depth - 1, false) * kernel(depth - 1, false);
      default: return kernel(depth - 1, noise) + kernel(depth - 1, noise);
    }
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline biascal::Points column(std::initializer_list<double> v) {
  biascal::Points p(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) p(i++, 0) = x;
  return p;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

// Naive Gaussian log-density with an explicit inverse and determinant.
inline double naive_log_density(const Eigen::MatrixXd& c, const Eigen::VectorXd& r) {
  const Eigen::MatrixXd inv = c.inverse();
  const double n = static_cast<double>(r.size());
  return -0.5 * r.dot(inv * r) - 0.5 * std::log(c.determinant()) - 0.5 * n * std::log(2.0 * M_PI);
}

}  // namespace testing
