#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace biascal {

// One coordinate per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

[[nodiscard]] inline std::span<const double> row(const Points& p, Eigen::Index i) {
  return {p.data() + i * p.cols(), static_cast<std::size_t>(p.cols())};
}

struct Hyperparameter {
  double value = 0.0;
  bool free = false;
  double lo = 0.0;
  double hi = 0.0;

  Hyperparameter() = default;
  Hyperparameter(double v) : value(v), lo(v), hi(v) {}  // NOLINT: fixed value
  Hyperparameter(double v, double lower, double upper) : value(v), free(true), lo(lower), hi(upper) {}
};

class Kernel;

namespace kernel {

struct Constant {
  Hyperparameter value;
};

struct Matern32 {
  Hyperparameter amplitude;
  Hyperparameter lengthscale;
};

struct Rbf {
  Hyperparameter amplitude;
  Hyperparameter lengthscale;
};

struct WhiteNoise {
  Hyperparameter variance;
};

// Noise variance interpolated between anchors by Nadaraya-Watson regression
// on log-variances' exponentials; exact at the anchors.
struct Heteroscedastic {
  Points anchors;
  std::vector<Hyperparameter> log_variances;
  Hyperparameter bandwidth;
};

struct Sum;
struct Product;

}  // namespace kernel

class Kernel {
 public:
  struct Node;

  explicit Kernel(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  static Kernel constant(Hyperparameter c);
  static Kernel matern32(Hyperparameter amplitude, Hyperparameter lengthscale);
  static Kernel rbf(Hyperparameter amplitude, Hyperparameter lengthscale);
  static Kernel white_noise(Hyperparameter variance);
  // bandwidth <= 0 selects the mean anchor spacing
  static Kernel heteroscedastic(Points anchors, std::vector<Hyperparameter> log_variances,
                                Hyperparameter bandwidth = Hyperparameter(0.0));

  [[nodiscard]] const Node& node() const { return *node_; }
  [[nodiscard]] std::string describe() const;

  friend Kernel operator+(const Kernel& a, const Kernel& b);
  friend Kernel operator*(const Kernel& a, const Kernel& b);

 private:
  std::shared_ptr<const Node> node_;
};

namespace kernel {
struct Sum {
  Kernel left;
  Kernel right;
};
struct Product {
  Kernel left;
  Kernel right;
};
}  // namespace kernel

struct Kernel::Node {
  std::variant<kernel::Constant, kernel::Matern32, kernel::Rbf, kernel::WhiteNoise,
               kernel::Heteroscedastic, kernel::Sum, kernel::Product>
      v;
};

struct FreeParameter {
  std::string name;
  double value;
  double lo;
  double hi;
  bool log_scale;  // optimized as log(value)
};

// Depth-first, left before right; the same order with_free_values consumes.
[[nodiscard]] std::vector<FreeParameter> free_parameters(const Kernel& k);
[[nodiscard]] Kernel with_free_values(const Kernel& k, std::span<const double> values);

// Throws ConfigError when a hyperparameter or anchor set violates its invariants.
void validate(const Kernel& k);

// Dimension fixed by heteroscedastic anchors, if any.
[[nodiscard]] std::optional<std::size_t> input_dimension(const Kernel& k);

[[nodiscard]] bool contains_noise(const Kernel& k);

struct NoiseSplit {
  std::optional<Kernel> signal;
  std::optional<Kernel> noise;
};

// Separates the correlated part from the diagonal noise part. Products that
// mix a noise sum with a signal factor are rejected.
[[nodiscard]] NoiseSplit split_noise(const Kernel& k);

// A free parameter that scales the whole kernel: c in C(c) = c^power * C(1).
struct ScaleParameter {
  std::size_t index;
  int power;
};
[[nodiscard]] std::optional<ScaleParameter> scale_parameter(const Kernel& k);

[[nodiscard]] double default_bandwidth(const Points& anchors);
[[nodiscard]] double heteroscedastic_variance(const kernel::Heteroscedastic& h, std::span<const double> x);

[[nodiscard]] double eval_kernel(const Kernel& k, std::span<const double> x, std::span<const double> xp);

// Caches unit-amplitude Matérn/RBF correlation blocks keyed on lengthscale
// and point contents. Not thread-safe; one per worker.
class GramCache {
 public:
  explicit GramCache(std::size_t capacity = 8) : capacity_(capacity) {}

  const Eigen::MatrixXd& correlation(int kind, double lengthscale, const Points& x, const Points* y,
                                     bool parallel);
  [[nodiscard]] std::size_t hits() const noexcept { return hits_; }
  [[nodiscard]] std::size_t misses() const noexcept { return misses_; }

 private:
  struct Entry {
    int kind;
    double lengthscale;
    Points x;
    Points y;
    bool symmetric;
    Eigen::MatrixXd m;
  };
  std::size_t capacity_;
  std::vector<Entry> entries_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// Symmetric gram over one point set; noise kernels contribute on the diagonal.
[[nodiscard]] Eigen::MatrixXd gram(const Kernel& k, const Points& x, GramCache* cache = nullptr);
// Cross gram between distinct point sets; noise kernels contribute nothing.
[[nodiscard]] Eigen::MatrixXd gram(const Kernel& k, const Points& x, const Points& y, GramCache* cache = nullptr);

// Single-threaded reference assembly, entry by entry through eval_kernel semantics.
namespace serial {
[[nodiscard]] Eigen::MatrixXd gram(const Kernel& k, const Points& x);
[[nodiscard]] Eigen::MatrixXd gram(const Kernel& k, const Points& x, const Points& y);
}  // namespace serial

namespace detail {
enum LeafKind : int { matern32_leaf = 0, rbf_leaf = 1 };
// Unit-amplitude correlation block; parallel over rows when requested.
[[nodiscard]] Eigen::MatrixXd correlation_block(int kind, double lengthscale, const Points& x, const Points* y,
                                                bool parallel);
// Noise leaves contribute only when same_record is set.
[[nodiscard]] double eval_entry_record(const Kernel& k, std::span<const double> x, std::span<const double> y,
                                       bool same_record);
void check_points(const Kernel& k, const Points& x, const Points* y);
}  // namespace detail

}  // namespace biascal
