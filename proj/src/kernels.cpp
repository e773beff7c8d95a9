#include "biascal/kernels.hpp"

#include "biascal/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace biascal {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Kernel make(decltype(Kernel::Node::v) v) { return Kernel(std::make_shared<const Kernel::Node>(Kernel::Node{std::move(v)})); }

const char* node_name(const Kernel& k) {
  return std::visit(overloaded{[](const kernel::Constant&) { return "constant"; },
                               [](const kernel::Matern32&) { return "matern32"; },
                               [](const kernel::Rbf&) { return "rbf"; },
                               [](const kernel::WhiteNoise&) { return "white_noise"; },
                               [](const kernel::Heteroscedastic&) { return "heteroscedastic"; },
                               [](const kernel::Sum&) { return "sum"; },
                               [](const kernel::Product&) { return "product"; }},
                    k.node().v);
}

bool same_coordinates(std::span<const double> a, std::span<const double> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void push(std::vector<FreeParameter>& out, const std::string& name, const Hyperparameter& h, bool log_scale) {
  if (h.free) out.push_back({name, h.value, h.lo, h.hi, log_scale});
}

void collect(const Kernel& k, const std::string& prefix, std::vector<FreeParameter>& out) {
  std::visit(overloaded{
                 [&](const kernel::Constant& c) { push(out, prefix + "constant.value", c.value, true); },
                 [&](const kernel::Matern32& m) {
                   push(out, prefix + "matern32.amplitude", m.amplitude, true);
                   push(out, prefix + "matern32.lengthscale", m.lengthscale, true);
                 },
                 [&](const kernel::Rbf& m) {
                   push(out, prefix + "rbf.amplitude", m.amplitude, true);
                   push(out, prefix + "rbf.lengthscale", m.lengthscale, true);
                 },
                 [&](const kernel::WhiteNoise& w) { push(out, prefix + "white_noise.variance", w.variance, true); },
                 [&](const kernel::Heteroscedastic& h) {
                   for (std::size_t i = 0; i < h.log_variances.size(); ++i)
                     push(out, prefix + "heteroscedastic.log_variance[" + std::to_string(i) + "]", h.log_variances[i],
                          false);
                   push(out, prefix + "heteroscedastic.bandwidth", h.bandwidth, true);
                 },
                 [&](const kernel::Sum& s) {
                   collect(s.left, prefix + "sum.0.", out);
                   collect(s.right, prefix + "sum.1.", out);
                 },
                 [&](const kernel::Product& p) {
                   collect(p.left, prefix + "product.0.", out);
                   collect(p.right, prefix + "product.1.", out);
                 }},
             k.node().v);
}

void assign(Hyperparameter& h, std::span<const double> values, std::size_t& pos) {
  if (!h.free) return;
  if (pos >= values.size()) throw DimensionError("with_free_values: too few values");
  h.value = values[pos++];
}

Kernel rebuild(const Kernel& k, std::span<const double> values, std::size_t& pos) {
  const std::size_t start = pos;
  Kernel out = std::visit(
      overloaded{[&](kernel::Constant c) {
                   assign(c.value, values, pos);
                   return make(c);
                 },
                 [&](kernel::Matern32 m) {
                   assign(m.amplitude, values, pos);
                   assign(m.lengthscale, values, pos);
                   return make(m);
                 },
                 [&](kernel::Rbf m) {
                   assign(m.amplitude, values, pos);
                   assign(m.lengthscale, values, pos);
                   return make(m);
                 },
                 [&](kernel::WhiteNoise w) {
                   assign(w.variance, values, pos);
                   return make(w);
                 },
                 [&](const kernel::Heteroscedastic& h) {
                   bool any = h.bandwidth.free;
                   for (const auto& lv : h.log_variances) any = any || lv.free;
                   if (!any) return k;
                   kernel::Heteroscedastic c = h;
                   for (auto& lv : c.log_variances) assign(lv, values, pos);
                   assign(c.bandwidth, values, pos);
                   return make(std::move(c));
                 },
                 [&](const kernel::Sum& s) {
                   Kernel l = rebuild(s.left, values, pos);
                   Kernel r = rebuild(s.right, values, pos);
                   return make(kernel::Sum{l, r});
                 },
                 [&](const kernel::Product& p) {
                   Kernel l = rebuild(p.left, values, pos);
                   Kernel r = rebuild(p.right, values, pos);
                   return make(kernel::Product{l, r});
                 }},
      k.node().v);
  // Untouched subtrees keep their identity.
  return pos == start ? k : out;
}

void check(const Hyperparameter& h, const std::string& name, bool positive) {
  const bool bad_value = positive ? !(h.value > 0.0) : !std::isfinite(h.value);
  if (bad_value) throw ConfigError(name + ": invalid value " + std::to_string(h.value));
  if (h.free) {
    if (!(h.lo < h.hi)) throw ConfigError(name + ": bounds require lo < hi");
    if (h.value < h.lo || h.value > h.hi) throw ConfigError(name + ": value outside bounds");
    if (positive && !(h.lo > 0.0)) throw ConfigError(name + ": lower bound must be positive");
  }
}

void check_nonnegative(const Hyperparameter& h, const std::string& name) {
  if (!(h.value >= 0.0) || !std::isfinite(h.value)) throw ConfigError(name + ": must be >= 0");
  if (h.free) check(h, name, true);
}

enum class Part { signal, noise, mixed };

Part classify(const Kernel& k) {
  return std::visit(overloaded{[](const kernel::WhiteNoise&) { return Part::noise; },
                               [](const kernel::Heteroscedastic&) { return Part::noise; },
                               [](const kernel::Sum& s) {
                                 const Part a = classify(s.left);
                                 const Part b = classify(s.right);
                                 return a == b ? a : Part::mixed;
                               },
                               [](const kernel::Product& p) {
                                 const Part a = classify(p.left);
                                 const Part b = classify(p.right);
                                 if (a == Part::mixed || b == Part::mixed)
                                   throw ConfigError("product of a noise sum with another factor is not supported");
                                 return (a == Part::signal && b == Part::signal) ? Part::signal : Part::noise;
                               },
                               [](const auto&) { return Part::signal; }},
                    k.node().v);
}

std::optional<Kernel> add(const std::optional<Kernel>& a, const std::optional<Kernel>& b) {
  if (!a) return b;
  if (!b) return a;
  return *a + *b;
}

NoiseSplit split(const Kernel& k) {
  const Part p = classify(k);
  if (p == Part::signal) return {k, std::nullopt};
  if (p == Part::noise) return {std::nullopt, k};
  const auto& s = std::get<kernel::Sum>(k.node().v);
  NoiseSplit a = split(s.left);
  NoiseSplit b = split(s.right);
  return {add(a.signal, b.signal), add(a.noise, b.noise)};
}

// Returns the power with which the free parameter scales k, or 0 if it does not.
int scale_power(const Kernel& k) {
  return std::visit(overloaded{[](const kernel::Constant& c) { return c.value.free ? 1 : 0; },
                               [](const kernel::Matern32& m) { return m.amplitude.free ? 2 : 0; },
                               [](const kernel::Rbf& m) { return m.amplitude.free ? 2 : 0; },
                               [](const kernel::Product& p) {
                                 const int a = scale_power(p.left);
                                 return a != 0 ? a : scale_power(p.right);
                               },
                               [](const auto&) { return 0; }},
                    k.node().v);
}

double eval_entry(const Kernel& k, std::span<const double> x, std::span<const double> y, bool same_record) {
  return std::visit(
      overloaded{[](const kernel::Constant& c) { return c.value.value; },
                 [&](const kernel::Matern32& m) {
                   const double s = std::sqrt(3.0) * std::sqrt(squared_distance(x, y)) / m.lengthscale.value;
                   return m.amplitude.value * m.amplitude.value * (1.0 + s) * std::exp(-s);
                 },
                 [&](const kernel::Rbf& m) {
                   const double l = m.lengthscale.value;
                   return m.amplitude.value * m.amplitude.value * std::exp(-0.5 * squared_distance(x, y) / (l * l));
                 },
                 [&](const kernel::WhiteNoise& w) { return same_record ? w.variance.value : 0.0; },
                 [&](const kernel::Heteroscedastic& h) { return same_record ? heteroscedastic_variance(h, x) : 0.0; },
                 [&](const kernel::Sum& s) {
                   return eval_entry(s.left, x, y, same_record) + eval_entry(s.right, x, y, same_record);
                 },
                 [&](const kernel::Product& p) {
                   return eval_entry(p.left, x, y, same_record) * eval_entry(p.right, x, y, same_record);
                 }},
      k.node().v);
}

void check_dimension(const Kernel& k, std::size_t d) {
  std::visit(overloaded{[&](const kernel::Heteroscedastic& h) {
                          if (static_cast<std::size_t>(h.anchors.cols()) != d)
                            throw DimensionError("heteroscedastic: anchor dimension " +
                                                 std::to_string(h.anchors.cols()) + " but input dimension " +
                                                 std::to_string(d));
                        },
                        [&](const kernel::Sum& s) {
                          check_dimension(s.left, d);
                          check_dimension(s.right, d);
                        },
                        [&](const kernel::Product& p) {
                          check_dimension(p.left, d);
                          check_dimension(p.right, d);
                        },
                        [](const auto&) {}},
             k.node().v);
}

}  // namespace

Kernel Kernel::constant(Hyperparameter c) { return make(kernel::Constant{c}); }
Kernel Kernel::matern32(Hyperparameter amplitude, Hyperparameter lengthscale) {
  return make(kernel::Matern32{amplitude, lengthscale});
}
Kernel Kernel::rbf(Hyperparameter amplitude, Hyperparameter lengthscale) {
  return make(kernel::Rbf{amplitude, lengthscale});
}
Kernel Kernel::white_noise(Hyperparameter variance) { return make(kernel::WhiteNoise{variance}); }

Kernel Kernel::heteroscedastic(Points anchors, std::vector<Hyperparameter> log_variances, Hyperparameter bandwidth) {
  if (static_cast<std::size_t>(anchors.rows()) != log_variances.size())
    throw DimensionError("heteroscedastic: one log-variance per anchor required");
  if (!(bandwidth.value > 0.0)) {
    const double b = default_bandwidth(anchors);
    bandwidth.value = b;
    if (!bandwidth.free) bandwidth.lo = bandwidth.hi = b;
  }
  return make(kernel::Heteroscedastic{std::move(anchors), std::move(log_variances), bandwidth});
}

Kernel operator+(const Kernel& a, const Kernel& b) { return make(kernel::Sum{a, b}); }
Kernel operator*(const Kernel& a, const Kernel& b) { return make(kernel::Product{a, b}); }

std::string Kernel::describe() const {
  std::ostringstream os;
  std::visit(overloaded{[&](const kernel::Constant& c) { os << "constant(" << c.value.value << ")"; },
                        [&](const kernel::Matern32& m) {
                          os << "matern32(" << m.amplitude.value << ", " << m.lengthscale.value << ")";
                        },
                        [&](const kernel::Rbf& m) {
                          os << "rbf(" << m.amplitude.value << ", " << m.lengthscale.value << ")";
                        },
                        [&](const kernel::WhiteNoise& w) { os << "white_noise(" << w.variance.value << ")"; },
                        [&](const kernel::Heteroscedastic& h) {
                          os << "heteroscedastic(" << h.anchors.rows() << " anchors)";
                        },
                        [&](const kernel::Sum& s) { os << "(" << s.left.describe() << " + " << s.right.describe() << ")"; },
                        [&](const kernel::Product& p) {
                          os << p.left.describe() << " * " << p.right.describe();
                        }},
             node_->v);
  return os.str();
}

std::vector<FreeParameter> free_parameters(const Kernel& k) {
  std::vector<FreeParameter> out;
  collect(k, "", out);
  return out;
}

Kernel with_free_values(const Kernel& k, std::span<const double> values) {
  std::size_t pos = 0;
  Kernel out = rebuild(k, values, pos);
  if (pos != values.size()) throw DimensionError("with_free_values: too many values");
  return out;
}

void validate(const Kernel& k) {
  std::visit(overloaded{[](const kernel::Constant& c) { check_nonnegative(c.value, "constant.value"); },
                        [](const kernel::Matern32& m) {
                          check(m.amplitude, "matern32.amplitude", true);
                          check(m.lengthscale, "matern32.lengthscale", true);
                        },
                        [](const kernel::Rbf& m) {
                          check(m.amplitude, "rbf.amplitude", true);
                          check(m.lengthscale, "rbf.lengthscale", true);
                        },
                        [](const kernel::WhiteNoise& w) { check_nonnegative(w.variance, "white_noise.variance"); },
                        [](const kernel::Heteroscedastic& h) {
                          if (h.anchors.rows() == 0) throw ConfigError("heteroscedastic: no anchors");
                          for (const auto& lv : h.log_variances) check(lv, "heteroscedastic.log_variance", false);
                          check(h.bandwidth, "heteroscedastic.bandwidth", true);
                          for (Eigen::Index i = 0; i < h.anchors.rows(); ++i)
                            for (Eigen::Index j = 0; j < i; ++j)
                              if (same_coordinates(row(h.anchors, i), row(h.anchors, j)))
                                throw ConfigError("heteroscedastic: duplicate anchor " + std::to_string(i));
                        },
                        [](const kernel::Sum& s) {
                          validate(s.left);
                          validate(s.right);
                        },
                        [](const kernel::Product& p) {
                          validate(p.left);
                          validate(p.right);
                        }},
             k.node().v);
  (void)classify(k);
}

std::optional<std::size_t> input_dimension(const Kernel& k) {
  return std::visit(overloaded{[](const kernel::Heteroscedastic& h) -> std::optional<std::size_t> {
                                 return static_cast<std::size_t>(h.anchors.cols());
                               },
                               [](const kernel::Sum& s) {
                                 auto a = input_dimension(s.left);
                                 return a ? a : input_dimension(s.right);
                               },
                               [](const kernel::Product& p) {
                                 auto a = input_dimension(p.left);
                                 return a ? a : input_dimension(p.right);
                               },
                               [](const auto&) -> std::optional<std::size_t> { return std::nullopt; }},
                    k.node().v);
}

bool contains_noise(const Kernel& k) { return classify(k) != Part::signal; }

NoiseSplit split_noise(const Kernel& k) { return split(k); }

std::optional<ScaleParameter> scale_parameter(const Kernel& k) {
  if (free_parameters(k).size() != 1) return std::nullopt;
  const int p = scale_power(k);
  if (p == 0) return std::nullopt;
  return ScaleParameter{0, p};
}

double default_bandwidth(const Points& anchors) {
  const Eigen::Index n = anchors.rows();
  if (n < 2) return 1.0;
  double total = 0.0;
  if (anchors.cols() == 1) {
    std::vector<double> v(anchors.data(), anchors.data() + n);
    std::sort(v.begin(), v.end());
    total = (v.back() - v.front()) / static_cast<double>(n - 1);
    return total > 0.0 ? total : 1.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) best = std::min(best, squared_distance(row(anchors, i), row(anchors, j)));
    total += std::sqrt(best);
  }
  total /= static_cast<double>(n);
  return total > 0.0 ? total : 1.0;
}

double heteroscedastic_variance(const kernel::Heteroscedastic& h, std::span<const double> x) {
  const Eigen::Index n = h.anchors.rows();
  if (static_cast<std::size_t>(h.anchors.cols()) != x.size())
    throw DimensionError("heteroscedastic: anchor dimension " + std::to_string(h.anchors.cols()) +
                         " but input dimension " + std::to_string(x.size()));
  std::vector<double> e(static_cast<std::size_t>(n));
  double top = -std::numeric_limits<double>::infinity();
  const double b2 = 2.0 * h.bandwidth.value * h.bandwidth.value;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a = row(h.anchors, i);
    if (same_coordinates(a, x)) return std::exp(h.log_variances[static_cast<std::size_t>(i)].value);
    e[static_cast<std::size_t>(i)] = -squared_distance(a, x) / b2;
    top = std::max(top, e[static_cast<std::size_t>(i)]);
  }
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = std::exp(e[static_cast<std::size_t>(i)] - top);
    num += w * std::exp(h.log_variances[static_cast<std::size_t>(i)].value);
    den += w;
  }
  return num / den;
}

double eval_kernel(const Kernel& k, std::span<const double> x, std::span<const double> xp) {
  if (x.size() != xp.size())
    throw DimensionError(std::string(node_name(k)) + ": coordinate dimensions " + std::to_string(x.size()) + " and " +
                         std::to_string(xp.size()) + " differ");
  check_dimension(k, x.size());
  return eval_entry(k, x, xp, same_coordinates(x, xp));
}

namespace detail {
double eval_entry_record(const Kernel& k, std::span<const double> x, std::span<const double> y, bool same_record) {
  return eval_entry(k, x, y, same_record);
}
void check_points(const Kernel& k, const Points& x, const Points* y) {
  if (x.rows() == 0 || (y && y->rows() == 0)) throw ConfigError(std::string(node_name(k)) + ": empty coordinate list");
  if (y && y->cols() != x.cols())
    throw DimensionError(std::string(node_name(k)) + ": coordinate dimensions " + std::to_string(x.cols()) + " and " +
                         std::to_string(y->cols()) + " differ");
  check_dimension(k, static_cast<std::size_t>(x.cols()));
}
}  // namespace detail

}  // namespace biascal
