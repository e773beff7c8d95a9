#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace biascal::optimize {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Minimum {
  Eigen::VectorXd x;
  double value;
  std::size_t evaluations;
};

// Derivative-free simplex search (GSL nmsimplex2). Stops when the simplex
// size falls below tol or after max_iterations.
[[nodiscard]] Minimum nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                                  double tol = 1e-6, std::size_t max_iterations = 1000);

// First `count` points of the Halton sequence in [0,1]^dim.
[[nodiscard]] std::vector<Eigen::VectorXd> halton(std::size_t dim, std::size_t count);

// Minimizes a scalar function: grid scan over [a, b] then golden-section
// refinement around the best grid node.
[[nodiscard]] double scan_and_refine(const std::function<double(double)>& f, double a, double b,
                                     std::size_t grid = 200, double tol = 1e-10);

}  // namespace biascal::optimize
