#pragma once

#include "biascal/kernels.hpp"
#include "biascal/models.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace biascal {

struct SensitivityMatrix {
  Eigen::MatrixXd F;  // anchors × parameters
  Points anchors;
  std::vector<double> theta;
  std::vector<double> steps;
};

// Central differences of the model at every anchor; anchors carry model inputs only.
[[nodiscard]] SensitivityMatrix model_gradient_fd(const ForwardModel& model, std::span<const double> theta,
                                                  const Points& anchors, std::span<const double> steps);

struct OrthogonalGram {
  Eigen::MatrixXd matrix;
  std::optional<std::string> warning;  // set when FᵀWF is badly conditioned
};

// k(x,x') - w(x)ᵀ F (FᵀWF)⁺ Fᵀ w(x'). Noise components of the kernel are left
// out of the correction and added back on the diagonal of symmetric grams.
[[nodiscard]] OrthogonalGram orthogonal_gram(const Kernel& kernel, const Eigen::MatrixXd& F, const Points& anchors,
                                             const Points& x, GramCache* cache = nullptr);
[[nodiscard]] OrthogonalGram orthogonal_gram(const Kernel& kernel, const Eigen::MatrixXd& F, const Points& anchors,
                                             const Points& x, const Points& xp, GramCache* cache = nullptr);

}  // namespace biascal
