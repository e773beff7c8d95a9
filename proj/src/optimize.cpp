#include "biascal/optimize.hpp"

#include "biascal/error.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_min.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_qrng.h>

#include <cmath>
#include <limits>
#include <memory>

namespace biascal::optimize {

namespace {

struct GslErrorsOff {
  GslErrorsOff() { gsl_set_error_handler_off(); }
};
const GslErrorsOff gsl_errors_off;

// GSL's simplex arithmetic breaks on infinities; failures map to a large finite value.
constexpr double failure_value = 1e300;

struct Context {
  const Objective* f;
  Eigen::VectorXd buffer;
  std::size_t evaluations = 0;
};

double trampoline(const gsl_vector* v, void* params) {
  auto* ctx = static_cast<Context*>(params);
  for (Eigen::Index i = 0; i < ctx->buffer.size(); ++i) ctx->buffer[i] = gsl_vector_get(v, static_cast<std::size_t>(i));
  ++ctx->evaluations;
  const double y = (*ctx->f)(ctx->buffer);
  return std::isfinite(y) ? y : failure_value;
}

struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

}  // namespace

Minimum nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step, double tol,
                    std::size_t max_iterations) {
  const auto n = static_cast<std::size_t>(x0.size());
  if (n == 0) return {x0, f(x0), 1};
  Context ctx{&f, Eigen::VectorXd(x0.size())};
  std::unique_ptr<gsl_vector, VectorDeleter> x(gsl_vector_alloc(n));
  std::unique_ptr<gsl_vector, VectorDeleter> s(gsl_vector_alloc(n));
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x.get(), i, x0[static_cast<Eigen::Index>(i)]);
    gsl_vector_set(s.get(), i, step[static_cast<Eigen::Index>(i)]);
  }
  gsl_multimin_function fn{&trampoline, n, &ctx};
  std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> m(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
  if (gsl_multimin_fminimizer_set(m.get(), &fn, x.get(), s.get()) != GSL_SUCCESS)
    throw NumericalError("nelder_mead: could not initialize simplex");
  for (std::size_t it = 0; it < max_iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m.get()), tol) == GSL_SUCCESS) break;
  }
  Minimum out{Eigen::VectorXd(x0.size()), gsl_multimin_fminimizer_minimum(m.get()), ctx.evaluations};
  const gsl_vector* best = gsl_multimin_fminimizer_x(m.get());
  for (std::size_t i = 0; i < n; ++i) out.x[static_cast<Eigen::Index>(i)] = gsl_vector_get(best, i);
  if (out.value >= failure_value) out.value = std::numeric_limits<double>::infinity();
  return out;
}

std::vector<Eigen::VectorXd> halton(std::size_t dim, std::size_t count) {
  std::vector<Eigen::VectorXd> out;
  if (dim == 0) return std::vector<Eigen::VectorXd>(count, Eigen::VectorXd());
  gsl_qrng* q = gsl_qrng_alloc(gsl_qrng_halton, static_cast<unsigned>(dim));
  if (!q) throw ConfigError("halton: unsupported dimension " + std::to_string(dim));
  std::vector<double> buf(dim);
  for (std::size_t k = 0; k < count; ++k) {
    gsl_qrng_get(q, buf.data());
    out.emplace_back(Eigen::Map<Eigen::VectorXd>(buf.data(), static_cast<Eigen::Index>(dim)));
  }
  gsl_qrng_free(q);
  return out;
}

namespace {
double scalar_trampoline(double x, void* params) { return (*static_cast<const std::function<double(double)>*>(params))(x); }
}  // namespace

double scan_and_refine(const std::function<double(double)>& f, double a, double b, std::size_t grid, double tol) {
  if (!(a < b) || grid < 2) throw ConfigError("scan_and_refine: invalid interval");
  const double h = (b - a) / static_cast<double>(grid);
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= grid; ++i) {
    const double v = f(a + h * static_cast<double>(i));
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  const double xm = a + h * static_cast<double>(best);
  if (best == 0 || best == grid) return xm;
  double lo = xm - h;
  double hi = xm + h;
  if (!(best_value < f(lo) && best_value < f(hi))) return xm;
  gsl_function fn{&scalar_trampoline, const_cast<std::function<double(double)>*>(&f)};
  gsl_min_fminimizer* m = gsl_min_fminimizer_alloc(gsl_min_fminimizer_goldensection);
  gsl_min_fminimizer_set_with_values(m, &fn, xm, best_value, lo, f(lo), hi, f(hi));
  double x = xm;
  for (int it = 0; it < 200; ++it) {
    if (gsl_min_fminimizer_iterate(m) != GSL_SUCCESS) break;
    x = gsl_min_fminimizer_x_minimum(m);
    lo = gsl_min_fminimizer_x_lower(m);
    hi = gsl_min_fminimizer_x_upper(m);
    if (gsl_min_test_interval(lo, hi, tol, 0.0) == GSL_SUCCESS) break;
  }
  gsl_min_fminimizer_free(m);
  return x;
}

}  // namespace biascal::optimize
