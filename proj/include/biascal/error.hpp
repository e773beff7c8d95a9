#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace biascal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or inconsistent inputs (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Model evaluated outside its domain, e.g. a non-positive stiffness.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Factorization or sampler failure (CLI exit code 3).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, std::vector<double> hyperparameters = {})
      : Error(what), hyperparameters_(std::move(hyperparameters)) {}

  [[nodiscard]] const std::vector<double>& hyperparameters() const noexcept { return hyperparameters_; }

 private:
  std::vector<double> hyperparameters_;
};

}  // namespace biascal
