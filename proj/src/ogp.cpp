#include "biascal/ogp.hpp"

#include "biascal/error.hpp"

#include <cmath>
#include <sstream>

namespace biascal {

namespace {

constexpr double pinv_cutoff = 1e-12;
constexpr double condition_limit = 1e12;

// Factor B with B Bᵀ = (FᵀWF)⁺, dropping directions below the cutoff.
Eigen::MatrixXd pseudo_inverse_root(const Eigen::MatrixXd& m, std::optional<std::string>& warning) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd& lambda = es.eigenvalues();
  const double top = lambda.cwiseAbs().maxCoeff();
  if (top == 0.0) return Eigen::MatrixXd::Zero(m.rows(), 0);
  const double bottom = lambda.cwiseAbs().minCoeff();
  if (bottom == 0.0 || top / bottom > condition_limit) {
    std::ostringstream os;
    os << "orthogonal_gram: FᵀWF condition number " << (bottom == 0.0 ? INFINITY : top / bottom)
       << " exceeds 1e12; pseudo-inverse used";
    warning = os.str();
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    if (lambda[i] > pinv_cutoff * top) keep.push_back(i);
  Eigen::MatrixXd b(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    b.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]) / std::sqrt(lambda[keep[k]]);
  return b;
}

void check_shapes(const Eigen::MatrixXd& F, const Points& anchors, const Points& x) {
  if (anchors.rows() == 0) throw ConfigError("orthogonal_gram: no anchors");
  if (F.rows() != anchors.rows())
    throw DimensionError("orthogonal_gram: sensitivity rows " + std::to_string(F.rows()) + " but " +
                         std::to_string(anchors.rows()) + " anchors");
  if (anchors.cols() != x.cols()) throw DimensionError("orthogonal_gram: anchor and input dimensions differ");
}

}  // namespace

SensitivityMatrix model_gradient_fd(const ForwardModel& model, std::span<const double> theta, const Points& anchors,
                                    std::span<const double> steps) {
  const std::size_t t = theta.size();
  if (steps.size() != t) throw DimensionError("model_gradient_fd: one step per parameter required");
  for (double h : steps)
    if (!(h > 0.0)) throw ConfigError("model_gradient_fd: steps must be positive");
  SensitivityMatrix out{Eigen::MatrixXd(anchors.rows(), static_cast<Eigen::Index>(t)), anchors,
                        std::vector<double>(theta.begin(), theta.end()), std::vector<double>(steps.begin(), steps.end())};
  std::vector<double> up(theta.begin(), theta.end());
  std::vector<double> down(theta.begin(), theta.end());
  for (std::size_t k = 0; k < t; ++k) {
    up[k] = theta[k] + steps[k];
    down[k] = theta[k] - steps[k];
    for (Eigen::Index i = 0; i < anchors.rows(); ++i) {
      double fu = 0.0;
      double fd = 0.0;
      try {
        fu = model.evaluate(up, row(anchors, i));
        fd = model.evaluate(down, row(anchors, i));
      } catch (const DomainError& e) {
        std::ostringstream os;
        os << e.what() << " (finite difference for parameter " << k << " at anchor " << i << ", theta =";
        for (double v : theta) os << ' ' << v;
        os << ")";
        throw DomainError(os.str());
      }
      out.F(i, static_cast<Eigen::Index>(k)) = (fu - fd) / (2.0 * steps[k]);
    }
    up[k] = theta[k];
    down[k] = theta[k];
  }
  if (!out.F.allFinite()) throw NumericalError("model_gradient_fd: non-finite sensitivity", out.theta);
  return out;
}

OrthogonalGram orthogonal_gram(const Kernel& kernel, const Eigen::MatrixXd& F, const Points& anchors, const Points& x,
                               GramCache* cache) {
  check_shapes(F, anchors, x);
  const NoiseSplit parts = split_noise(kernel);
  OrthogonalGram out;
  if (parts.signal) {
    out.matrix = gram(*parts.signal, x, cache);
    const Eigen::MatrixXd w_anchor = gram(*parts.signal, anchors, cache);
    const Eigen::MatrixXd root = pseudo_inverse_root(F.transpose() * w_anchor * F, out.warning);
    if (root.cols() > 0) {
      const Eigen::MatrixXd b = gram(*parts.signal, x, anchors, cache) * F * root;
      Eigen::MatrixXd correction = b * b.transpose();
      out.matrix -= 0.5 * (correction + correction.transpose());
    }
  } else {
    out.matrix = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  }
  if (parts.noise) out.matrix += gram(*parts.noise, x, cache);
  return out;
}

OrthogonalGram orthogonal_gram(const Kernel& kernel, const Eigen::MatrixXd& F, const Points& anchors, const Points& x,
                               const Points& xp, GramCache* cache) {
  if (&x == &xp) return orthogonal_gram(kernel, F, anchors, x, cache);
  check_shapes(F, anchors, x);
  check_shapes(F, anchors, xp);
  const NoiseSplit parts = split_noise(kernel);
  OrthogonalGram out;
  if (!parts.signal) {
    out.matrix = Eigen::MatrixXd::Zero(x.rows(), xp.rows());
    return out;
  }
  out.matrix = gram(*parts.signal, x, xp, cache);
  const Eigen::MatrixXd w_anchor = gram(*parts.signal, anchors, cache);
  const Eigen::MatrixXd root = pseudo_inverse_root(F.transpose() * w_anchor * F, out.warning);
  if (root.cols() > 0) {
    const Eigen::MatrixXd bx = gram(*parts.signal, x, anchors, cache) * F * root;
    const Eigen::MatrixXd by = gram(*parts.signal, xp, anchors, cache) * F * root;
    out.matrix -= bx * by.transpose();
  }
  return out;
}

}  // namespace biascal
