#pragma once

#include "biascal/kernels.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace biascal {

class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual std::vector<std::string> parameter_names() const = 0;
  [[nodiscard]] virtual std::size_t input_dimension() const { return 1; }
  // Pure: identical arguments give bitwise-identical results.
  [[nodiscard]] virtual double evaluate(std::span<const double> theta, std::span<const double> x) const = 0;

  [[nodiscard]] std::size_t parameter_count() const { return parameter_names().size(); }
};

// Wraps a callable; used for ad hoc models in tests and oracles.
class FunctionModel final : public ForwardModel {
 public:
  using Fn = std::function<double(std::span<const double>, std::span<const double>)>;
  FunctionModel(std::string name, std::vector<std::string> parameters, Fn fn, std::size_t input_dimension = 1)
      : name_(std::move(name)), parameters_(std::move(parameters)), fn_(std::move(fn)), dim_(input_dimension) {}

  [[nodiscard]] std::string name() const override { return name_; }
  [[nodiscard]] std::vector<std::string> parameter_names() const override { return parameters_; }
  [[nodiscard]] std::size_t input_dimension() const override { return dim_; }
  [[nodiscard]] double evaluate(std::span<const double> theta, std::span<const double> x) const override {
    return fn_(theta, x);
  }

 private:
  std::string name_;
  std::vector<std::string> parameters_;
  Fn fn_;
  std::size_t dim_;
};

// f(x, θ) = θ·x against the truth 4x + x·sin 5x.
class PedagogicalModel final : public ForwardModel {
 public:
  [[nodiscard]] std::string name() const override { return "pedagogical"; }
  [[nodiscard]] std::vector<std::string> parameter_names() const override { return {"theta"}; }
  [[nodiscard]] double evaluate(std::span<const double> theta, std::span<const double> x) const override;
};

// Tip-loaded Euler-Bernoulli cantilever, midline deflection at x; θ = (E).
class BeamModel final : public ForwardModel {
 public:
  [[nodiscard]] std::string name() const override { return "beam"; }
  [[nodiscard]] std::vector<std::string> parameter_names() const override { return {"E"}; }
  [[nodiscard]] double evaluate(std::span<const double> theta, std::span<const double> x) const override;
  [[nodiscard]] static double deflection(double modulus, double load, double x);
};

// Midspan vertical displacement (upward positive) of a simply supported span
// as a function of the point-load position; θ = (E).
class InfluenceModel final : public ForwardModel {
 public:
  [[nodiscard]] std::string name() const override { return "influence"; }
  [[nodiscard]] std::vector<std::string> parameter_names() const override { return {"E"}; }
  [[nodiscard]] double evaluate(std::span<const double> theta, std::span<const double> x) const override;
  [[nodiscard]] static double deflection(double modulus, double position);
};

[[nodiscard]] std::unique_ptr<ForwardModel> make_model(const std::string& id);

namespace beam {
inline constexpr double length = 50.0;
inline constexpr double width = 3.0;
inline constexpr double height = 3.0;
inline constexpr double inertia = width * height * height * height / 12.0;
inline constexpr double load = 100e3;
inline constexpr double load_perturbation_mean = 20e3;
inline constexpr double load_perturbation_sd = 6e3;
inline constexpr double offset = -0.1;
inline constexpr double noise_sd = 2e-8;
inline constexpr double true_modulus = 30e9;
inline constexpr int series = 20;
inline constexpr double sensors[] = {10.0, 20.0, 30.0, 40.0, 50.0};
}  // namespace beam

namespace influence {
inline constexpr double span = 95.185;
inline constexpr double width = 14.0;
inline constexpr double depth = 2.5;
inline constexpr double inertia = width * depth * depth * depth / 12.0;
inline constexpr double load = 98.1e3;
inline constexpr double expansion = 1e-5;
inline constexpr double track_end = 104.0;
inline constexpr double noise_sd = 1e-12;
inline constexpr double true_modulus = 40e9;
inline constexpr double end_temperatures[] = {0.01, 0.028, 0.046, 0.064, 0.082, 0.1};
}  // namespace influence

namespace pedagogical {
inline constexpr double noise_sd = 0.02;
inline constexpr int grid_steps[] = {0, 1, 2, 3, 4, 5, 8, 9, 10, 16, 17, 18, 19, 20};  // multiples of 0.05
[[nodiscard]] double truth(double x);
}  // namespace pedagogical

struct Dataset {
  Points x;    // n × d_x
  Points eta;  // n × d_eta, d_eta = 0 when absent
  std::vector<int> series;
  Eigen::VectorXd y;
  double sigma_meas = 0.0;

  std::string generator;
  std::uint64_t seed = 0;
  std::map<std::string, double> true_parameters;

  [[nodiscard]] Eigen::Index size() const { return y.size(); }
  [[nodiscard]] bool has_eta() const { return eta.cols() > 0; }
  void validate() const;
};

[[nodiscard]] Dataset generate_pedagogical(std::uint64_t seed);
[[nodiscard]] Dataset generate_beam(std::uint64_t seed);
[[nodiscard]] Dataset generate_influence(std::uint64_t seed);
[[nodiscard]] Dataset generate(const std::string& name, std::uint64_t seed);

// Log-normal parameters whose distribution has the given mean and SD.
struct LogNormalMoments {
  double mu;
  double sigma;
};
[[nodiscard]] LogNormalMoments lognormal_from_moments(double mean, double sd);

// θ minimizing the trapezoid L² loss between model and curve over [a, b]
// (grid intervals), searched over [theta_lo, theta_hi].
[[nodiscard]] double l2_optimum(const ForwardModel& model, const std::function<double(double)>& curve, double a,
                                double b, std::size_t grid, double theta_lo, double theta_hi);
// θ minimizing the mean squared error over dataset rows.
[[nodiscard]] double mse_optimum(const ForwardModel& model, const Dataset& data, double theta_lo, double theta_hi);

}  // namespace biascal
