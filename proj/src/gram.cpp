#include "biascal/error.hpp"
#include "biascal/kernels.hpp"

#include <cmath>

namespace biascal {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline double unit_matern32(double r2, double l) {
  const double s = std::sqrt(3.0) * std::sqrt(r2) / l;
  return (1.0 + s) * std::exp(-s);
}

inline double unit_rbf(double r2, double l) { return std::exp(-0.5 * r2 / (l * l)); }

inline double sq_dist(const double* a, const double* b, Eigen::Index d) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

// Gram of a subtree without materializing structure it does not have:
// constants stay scalar and noise stays diagonal.
struct Block {
  enum Kind { scalar, diagonal, dense } kind = scalar;
  double s = 0.0;
  Eigen::VectorXd d;
  Eigen::MatrixXd m;
};

Block to_dense(Block b, Eigen::Index rows, Eigen::Index cols) {
  if (b.kind == Block::dense) return b;
  Block out;
  out.kind = Block::dense;
  if (b.kind == Block::scalar) {
    out.m = Eigen::MatrixXd::Constant(rows, cols, b.s);
  } else {
    out.m = Eigen::MatrixXd::Zero(rows, cols);
    out.m.diagonal() = b.d;
  }
  return out;
}

Block add(Block a, Block b, Eigen::Index rows, Eigen::Index cols) {
  if (a.kind == Block::scalar && b.kind == Block::scalar) {
    a.s += b.s;
    return a;
  }
  if (a.kind == Block::diagonal && b.kind == Block::diagonal) {
    a.d += b.d;
    return a;
  }
  if (a.kind != Block::dense && b.kind == Block::dense) std::swap(a, b);
  if (a.kind == Block::dense) {
    if (b.kind == Block::scalar)
      a.m.array() += b.s;
    else if (b.kind == Block::diagonal)
      a.m.diagonal() += b.d;
    else
      a.m += b.m;
    return a;
  }
  // scalar + diagonal
  return add(to_dense(std::move(a), rows, cols), std::move(b), rows, cols);
}

Block multiply(Block a, Block b) {
  if (a.kind == Block::scalar && b.kind == Block::scalar) {
    a.s *= b.s;
    return a;
  }
  if (b.kind == Block::scalar) std::swap(a, b);
  if (a.kind == Block::scalar) {
    if (b.kind == Block::diagonal)
      b.d *= a.s;
    else
      b.m *= a.s;
    return b;
  }
  if (a.kind == Block::dense && b.kind == Block::diagonal) std::swap(a, b);
  if (a.kind == Block::diagonal) {
    if (b.kind == Block::diagonal)
      a.d.array() *= b.d.array();
    else
      a.d.array() *= b.m.diagonal().array();
    return a;
  }
  a.m.array() *= b.m.array();
  return a;
}

struct Assembler {
  const Points& x;
  const Points* y;  // null for the symmetric case
  GramCache* cache;
  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return y ? y->rows() : x.rows(); }

  Block correlated(int kind, double amplitude, double lengthscale) const {
    Block b;
    b.kind = Block::dense;
    const double a2 = amplitude * amplitude;
    if (cache)
      b.m = a2 * cache->correlation(kind, lengthscale, x, y, true);
    else
      b.m = a2 * detail::correlation_block(kind, lengthscale, x, y, true);
    return b;
  }

  Block noise(const Eigen::VectorXd& diag) const {
    Block b;
    if (y) return b;  // cross grams between distinct records carry no noise
    b.kind = Block::diagonal;
    b.d = diag;
    return b;
  }

  Block operator()(const Kernel& k) const {
    return std::visit(
        overloaded{[&](const kernel::Constant& c) {
                     Block b;
                     b.s = c.value.value;
                     return b;
                   },
                   [&](const kernel::Matern32& m) {
                     return correlated(detail::matern32_leaf, m.amplitude.value, m.lengthscale.value);
                   },
                   [&](const kernel::Rbf& m) {
                     return correlated(detail::rbf_leaf, m.amplitude.value, m.lengthscale.value);
                   },
                   [&](const kernel::WhiteNoise& w) {
                     return noise(Eigen::VectorXd::Constant(rows(), w.variance.value));
                   },
                   [&](const kernel::Heteroscedastic& h) {
                     if (y) return Block{};
                     Eigen::VectorXd d(rows());
                     for (Eigen::Index i = 0; i < rows(); ++i) d[i] = heteroscedastic_variance(h, row(x, i));
                     return noise(d);
                   },
                   [&](const kernel::Sum& s) { return add((*this)(s.left), (*this)(s.right), rows(), cols()); },
                   [&](const kernel::Product& p) { return multiply((*this)(p.left), (*this)(p.right)); }},
        k.node().v);
  }
};

bool same_points(const Points& a, const Points& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

namespace detail {

Eigen::MatrixXd correlation_block(int kind, double lengthscale, const Points& x, const Points* y, bool parallel) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Points& other = y ? *y : x;
  const Eigen::Index m = other.rows();
  Eigen::MatrixXd out(n, m);
  const double* xp = x.data();
  const double* yp = other.data();
  const bool use_threads = parallel && n * m >= 4096;
  if (!y) {
#pragma omp parallel for schedule(dynamic, 16) if (use_threads)
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double r2 = sq_dist(xp + i * d, xp + j * d, d);
        const double v = kind == matern32_leaf ? unit_matern32(r2, lengthscale) : unit_rbf(r2, lengthscale);
        out(i, j) = v;
        out(j, i) = v;
      }
    }
  } else {
#pragma omp parallel for schedule(static) if (use_threads)
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double r2 = sq_dist(xp + i * d, yp + j * d, d);
        out(i, j) = kind == matern32_leaf ? unit_matern32(r2, lengthscale) : unit_rbf(r2, lengthscale);
      }
    }
  }
  return out;
}

}  // namespace detail

const Eigen::MatrixXd& GramCache::correlation(int kind, double lengthscale, const Points& x, const Points* y,
                                              bool parallel) {
  const bool symmetric = y == nullptr;
  for (auto& e : entries_) {
    if (e.kind == kind && e.lengthscale == lengthscale && e.symmetric == symmetric && same_points(e.x, x) &&
        (symmetric || same_points(e.y, *y))) {
      ++hits_;
      return e.m;
    }
  }
  ++misses_;
  if (entries_.size() >= capacity_) entries_.erase(entries_.begin());
  entries_.push_back(
      {kind, lengthscale, x, symmetric ? Points() : *y, symmetric, detail::correlation_block(kind, lengthscale, x, y, parallel)});
  return entries_.back().m;
}

Eigen::MatrixXd gram(const Kernel& k, const Points& x, GramCache* cache) {
  detail::check_points(k, x, nullptr);
  Assembler a{x, nullptr, cache};
  return to_dense(a(k), x.rows(), x.rows()).m;
}

Eigen::MatrixXd gram(const Kernel& k, const Points& x, const Points& y, GramCache* cache) {
  if (&x == &y) return gram(k, x, cache);
  detail::check_points(k, x, &y);
  Assembler a{x, &y, cache};
  return to_dense(a(k), x.rows(), y.rows()).m;
}

namespace serial {

Eigen::MatrixXd gram(const Kernel& k, const Points& x) {
  detail::check_points(k, x, nullptr);
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = detail::eval_entry_record(k, row(x, i), row(x, j), i == j);
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

Eigen::MatrixXd gram(const Kernel& k, const Points& x, const Points& y) {
  if (&x == &y) return serial::gram(k, x);
  detail::check_points(k, x, &y);
  Eigen::MatrixXd out(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j) out(i, j) = detail::eval_entry_record(k, row(x, i), row(y, j), false);
  return out;
}

}  // namespace serial

}  // namespace biascal
