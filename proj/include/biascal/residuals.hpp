#pragma once

#include "biascal/kernels.hpp"
#include "biascal/models.hpp"

#include <span>

namespace biascal {

// Per-column affine map to the unit box; empty offset means identity.
struct AffineScaling {
  Eigen::RowVectorXd offset;
  Eigen::RowVectorXd width;

  [[nodiscard]] bool identity() const { return offset.size() == 0; }
  [[nodiscard]] Points apply(const Points& p) const;
  [[nodiscard]] Points invert(const Points& p) const;
  // Columns with zero range keep unit width.
  [[nodiscard]] static AffineScaling unit_box(const Points& p);
};

struct ResidualSetup {
  bool extended = false;  // append η to the bias inputs
  AffineScaling scaling;  // applied to bias inputs
  double residual_scale = 1.0;
};

struct ResidualSet {
  Points inputs;  // scaled bias inputs
  Eigen::VectorXd values;
};

// x rows, or (x, η) rows when extended, before scaling.
[[nodiscard]] Points raw_bias_inputs(const Dataset& data, bool extended);
[[nodiscard]] Points bias_inputs(const Dataset& data, const ResidualSetup& setup);
[[nodiscard]] Eigen::VectorXd model_outputs(const ForwardModel& model, std::span<const double> theta, const Points& x);
// (y - f(x, θ)) · residual_scale; the model only ever sees x.
[[nodiscard]] ResidualSet residuals(const ForwardModel& model, std::span<const double> theta, const Dataset& data,
                                    const ResidualSetup& setup);

}  // namespace biascal
