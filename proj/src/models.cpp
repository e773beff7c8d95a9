#include "biascal/models.hpp"

#include "biascal/error.hpp"
#include "biascal/optimize.hpp"

#include <cmath>
#include <random>

namespace biascal {

namespace {

void require_arity(const ForwardModel& m, std::span<const double> theta, std::span<const double> x) {
  if (theta.size() != m.parameter_count() || x.size() != m.input_dimension())
    throw DimensionError(m.name() + ": expected " + std::to_string(m.parameter_count()) + " parameter(s) and " +
                         std::to_string(m.input_dimension()) + "-d input");
}

double positive_modulus(const std::string& model, double e) {
  if (!(e > 0.0)) throw DomainError(model + ": modulus must be positive, got " + std::to_string(e));
  return e;
}

Points column(const std::vector<double>& v) {
  Points p(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) p(static_cast<Eigen::Index>(i), 0) = v[i];
  return p;
}

Eigen::VectorXd vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

double pedagogical::truth(double x) { return 4.0 * x + x * std::sin(5.0 * x); }

double PedagogicalModel::evaluate(std::span<const double> theta, std::span<const double> x) const {
  require_arity(*this, theta, x);
  return theta[0] * x[0];
}

double BeamModel::deflection(double modulus, double load, double x) {
  using namespace beam;
  return -load * x * x * (3.0 * length - x) / (6.0 * modulus * inertia);
}

double BeamModel::evaluate(std::span<const double> theta, std::span<const double> x) const {
  require_arity(*this, theta, x);
  return deflection(positive_modulus("beam", theta[0]), beam::load, x[0]);
}

double InfluenceModel::deflection(double modulus, double position) {
  using namespace influence;
  if (position < 0.0 || position > span) return 0.0;
  const double a = position <= span / 2.0 ? position : span - position;
  return load * a * (3.0 * span * span - 4.0 * a * a) / (48.0 * modulus * inertia);
}

double InfluenceModel::evaluate(std::span<const double> theta, std::span<const double> x) const {
  require_arity(*this, theta, x);
  return -deflection(positive_modulus("influence", theta[0]), x[0]);
}

std::unique_ptr<ForwardModel> make_model(const std::string& id) {
  if (id == "pedagogical") return std::make_unique<PedagogicalModel>();
  if (id == "beam") return std::make_unique<BeamModel>();
  if (id == "influence") return std::make_unique<InfluenceModel>();
  throw ConfigError("unknown model '" + id + "'");
}

void Dataset::validate() const {
  const Eigen::Index n = y.size();
  if (n == 0) throw ConfigError("dataset: no rows");
  if (x.rows() != n || static_cast<Eigen::Index>(series.size()) != n)
    throw DimensionError("dataset: row counts of x, series and y differ");
  if (eta.cols() > 0 && eta.rows() != n) throw DimensionError("dataset: row count of eta differs");
  if (!(sigma_meas >= 0.0)) throw ConfigError("dataset: sigma_meas must be >= 0");
}

LogNormalMoments lognormal_from_moments(double mean, double sd) {
  const double s2 = std::log(1.0 + sd * sd / (mean * mean));
  return {std::log(mean) - 0.5 * s2, std::sqrt(s2)};
}

Dataset generate_pedagogical(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, pedagogical::noise_sd);
  std::vector<double> xs;
  std::vector<double> ys;
  for (int k : pedagogical::grid_steps) {
    const double x = k / 20.0;
    xs.push_back(x);
    ys.push_back(pedagogical::truth(x) + noise(rng));
  }
  Dataset d;
  d.x = column(xs);
  d.y = vector(ys);
  d.series.assign(xs.size(), 0);
  d.sigma_meas = pedagogical::noise_sd;
  d.generator = "pedagogical";
  d.seed = seed;
  return d;
}

Dataset generate_beam(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto ln = lognormal_from_moments(beam::load_perturbation_mean, beam::load_perturbation_sd);
  std::lognormal_distribution<double> perturbation(ln.mu, ln.sigma);
  std::normal_distribution<double> noise(0.0, beam::noise_sd);
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<int> ids;
  for (int s = 0; s < beam::series; ++s) {
    const double p = beam::load + perturbation(rng);
    for (double x : beam::sensors) {
      xs.push_back(x);
      ys.push_back(BeamModel::deflection(beam::true_modulus, p, x) + beam::offset + noise(rng));
      ids.push_back(s);
    }
  }
  Dataset d;
  d.x = column(xs);
  d.y = vector(ys);
  d.series = std::move(ids);
  d.sigma_meas = beam::noise_sd;
  d.generator = "beam";
  d.seed = seed;
  d.true_parameters = {{"E", beam::true_modulus}};
  return d;
}

Dataset generate_influence(std::uint64_t seed) {
  using namespace influence;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sd);
  std::vector<double> xs;
  std::vector<double> etas;
  std::vector<double> ys;
  std::vector<int> ids;
  int id = 0;
  for (double dt_end : end_temperatures) {
    for (int k = 0; k <= static_cast<int>(track_end); ++k) {
      const double x = k;
      const double dt = dt_end * x / track_end;
      const double uplift = expansion * dt / depth * span * span / 8.0;
      xs.push_back(x);
      etas.push_back(dt_end);
      ys.push_back(-InfluenceModel::deflection(true_modulus, x) + uplift + noise(rng));
      ids.push_back(id);
    }
    ++id;
  }
  Dataset d;
  d.x = column(xs);
  d.eta = column(etas);
  d.y = vector(ys);
  d.series = std::move(ids);
  d.sigma_meas = noise_sd;
  d.generator = "influence";
  d.seed = seed;
  d.true_parameters = {{"E", true_modulus}};
  return d;
}

Dataset generate(const std::string& name, std::uint64_t seed) {
  if (name == "pedagogical") return generate_pedagogical(seed);
  if (name == "beam") return generate_beam(seed);
  if (name == "influence") return generate_influence(seed);
  throw ConfigError("unknown generator '" + name + "'");
}

double l2_optimum(const ForwardModel& model, const std::function<double(double)>& curve, double a, double b,
                  std::size_t grid, double theta_lo, double theta_hi) {
  if (model.parameter_count() != 1) throw ConfigError("l2_optimum: scalar parameter required");
  if (grid < 1 || !(a < b)) throw ConfigError("l2_optimum: invalid domain or grid");
  std::vector<double> xs(grid + 1);
  std::vector<double> ys(grid + 1);
  for (std::size_t i = 0; i <= grid; ++i) {
    xs[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(grid);
    ys[i] = curve(xs[i]);
  }
  const double h = (b - a) / static_cast<double>(grid);
  auto loss = [&](double theta) {
    double s = 0.0;
    for (std::size_t i = 0; i <= grid; ++i) {
      const double r = ys[i] - model.evaluate(std::span<const double>(&theta, 1), std::span<const double>(&xs[i], 1));
      const double w = (i == 0 || i == grid) ? 0.5 : 1.0;
      s += w * r * r;
    }
    return s * h;
  };
  return optimize::scan_and_refine(loss, theta_lo, theta_hi, 400, 1e-12 * std::max(1.0, std::abs(theta_hi)));
}

double mse_optimum(const ForwardModel& model, const Dataset& data, double theta_lo, double theta_hi) {
  if (model.parameter_count() != 1) throw ConfigError("mse_optimum: scalar parameter required");
  data.validate();
  auto loss = [&](double theta) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      const double r = data.y[i] - model.evaluate(std::span<const double>(&theta, 1), row(data.x, i));
      s += r * r;
    }
    return s / static_cast<double>(data.size());
  };
  return optimize::scan_and_refine(loss, theta_lo, theta_hi, 2000, 1e-12 * std::max(1.0, std::abs(theta_hi)));
}

}  // namespace biascal
