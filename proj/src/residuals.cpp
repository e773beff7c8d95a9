#include "biascal/residuals.hpp"

#include "biascal/error.hpp"

namespace biascal {

Points AffineScaling::apply(const Points& p) const {
  if (identity()) return p;
  if (p.cols() != offset.size()) throw DimensionError("scaling: dimension mismatch");
  Points out(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) out.row(i) = (p.row(i) - offset).cwiseQuotient(width);
  return out;
}

Points AffineScaling::invert(const Points& p) const {
  if (identity()) return p;
  if (p.cols() != offset.size()) throw DimensionError("scaling: dimension mismatch");
  Points out(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) out.row(i) = p.row(i).cwiseProduct(width) + offset;
  return out;
}

AffineScaling AffineScaling::unit_box(const Points& p) {
  if (p.rows() == 0) throw ConfigError("scaling: no points");
  AffineScaling s;
  s.offset = p.colwise().minCoeff();
  s.width = p.colwise().maxCoeff() - s.offset;
  for (Eigen::Index j = 0; j < s.width.size(); ++j)
    if (!(s.width[j] > 0.0)) s.width[j] = 1.0;
  return s;
}

Points raw_bias_inputs(const Dataset& data, bool extended) {
  if (!extended) return data.x;
  if (!data.has_eta()) throw ConfigError("residuals: extension requested but the dataset has no eta column");
  Points out(data.x.rows(), data.x.cols() + data.eta.cols());
  out << data.x, data.eta;
  return out;
}

Points bias_inputs(const Dataset& data, const ResidualSetup& setup) {
  return setup.scaling.apply(raw_bias_inputs(data, setup.extended));
}

Eigen::VectorXd model_outputs(const ForwardModel& model, std::span<const double> theta, const Points& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = model.evaluate(theta, row(x, i));
  return out;
}

ResidualSet residuals(const ForwardModel& model, std::span<const double> theta, const Dataset& data,
                      const ResidualSetup& setup) {
  ResidualSet out;
  out.inputs = bias_inputs(data, setup);
  out.values = (data.y - model_outputs(model, theta, data.x)) * setup.residual_scale;
  return out;
}

}  // namespace biascal
