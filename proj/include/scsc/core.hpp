#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scsc {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Row-major so that a Grid's storage matches the (y * width + x) flattening
// used for code and filter indices throughout the library.
using Grid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A 2-D signal. Rows are image rows.
using Signal = Grid;

// Errors ---------------------------------------------------------------------

// Inconsistent dimensions between arguments.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad parameter values (negative thresholds, rates outside (0,1], ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite data or a solver that cannot produce a usable answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Domain types ---------------------------------------------------------------

struct Geometry {
  int height = 0;
  int width = 0;

  Index size() const { return Index(height) * width; }
  friend bool operator==(const Geometry&, const Geometry&) = default;
};

inline Geometry geometry_of(const Signal& s) { return {int(s.rows()), int(s.cols())}; }

// K square filters of odd side m, stored filter-major, each filter row-major.
class Dictionary {
 public:
  Dictionary() = default;
  Dictionary(int num_filters, int side);
  Dictionary(int num_filters, int side, Vector coeffs);

  int num_filters() const { return num_filters_; }
  int side() const { return side_; }
  int center() const { return side_ / 2; }
  Index filter_size() const { return Index(side_) * side_; }

  // Flattened filter vector f = [d_1, ..., d_K] of length K*M.
  const Vector& coeffs() const { return coeffs_; }
  Vector& coeffs() { return coeffs_; }

  auto filter(int k) { return coeffs_.segment(k * filter_size(), filter_size()); }
  auto filter(int k) const { return coeffs_.segment(k * filter_size(), filter_size()); }
  const double* filter_data(int k) const { return coeffs_.data() + k * filter_size(); }

  double max_filter_norm() const;

  // d_k <- d_k / max(1, ||d_k||) for every k.
  void project_to_unit_ball();

  friend bool operator==(const Dictionary& a, const Dictionary& b) {
    return a.num_filters_ == b.num_filters_ && a.side_ == b.side_ && a.coeffs_ == b.coeffs_;
  }

 private:
  int num_filters_ = 0;
  int side_ = 0;
  Vector coeffs_;
};

// K coefficient maps, each with the signal's geometry. Stacked as z in R^{DK}
// with index k*D + y*W + x.
class CodeMap {
 public:
  CodeMap() = default;
  CodeMap(int num_filters, Geometry geometry);
  CodeMap(int num_filters, Geometry geometry, Vector coeffs);

  int num_filters() const { return num_filters_; }
  const Geometry& geometry() const { return geometry_; }
  Index size() const { return coeffs_.size(); }

  const Vector& coeffs() const { return coeffs_; }
  Vector& coeffs() { return coeffs_; }

  Eigen::Map<const Grid> map(int k) const {
    return {coeffs_.data() + k * geometry_.size(), geometry_.height, geometry_.width};
  }
  Eigen::Map<Grid> map(int k) {
    return {coeffs_.data() + k * geometry_.size(), geometry_.height, geometry_.width};
  }

 private:
  int num_filters_ = 0;
  Geometry geometry_;
  Vector coeffs_;
};

// How the quadratic ADMM substep is solved.
enum class QuadMode { iterative, factor_cache, automatic };

// When test-set metrics are evaluated during online training.
enum class EvalSchedule { pow2, every, last, none };

enum class DrawPolicy { sequential, uniform_random };

struct TrainConfig {
  int num_filters = 100;
  int filter_side = 11;
  double lambda = 1.0;
  double subsample_rate = 1.0;
  int admm_iterations = 10;
  // Non-positive means "10 * lambda".
  double rho = 0.0;
  double alpha = 1.8;
  int minibatch = 1;
  int max_outer = 20;
  double tol = 1e-3;
  std::uint64_t seed = 0;

  QuadMode quad_mode = QuadMode::iterative;
  double cg_tol = 1e-4;
  int cg_max_iterations = 100;
  Index factor_cap = 6000;
  int filter_sweeps = 1;
  // Batch mode: unsampled codes keep their previous values and the sampled
  // ones are fitted to the remaining residual. When false, unsampled codes
  // are zero after every code update.
  bool retain_unsampled = false;
  EvalSchedule eval_schedule = EvalSchedule::pow2;
  DrawPolicy draw_policy = DrawPolicy::sequential;
  // Zero means std::thread::hardware_concurrency().
  int workers = 0;

  double effective_rho() const { return rho > 0.0 ? rho : 10.0 * lambda; }

  // Throws ConfigError on the first violated constraint.
  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  double wall_seconds = 0.0;
  double objective = 0.0;
  std::optional<double> test_objective;
  std::optional<double> test_psnr_db;
  double nonzero_fraction = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
};

// Operations -----------------------------------------------------------------

struct ContrastWindow {
  double sigma = 2.0;
  int radius = 6;
};

// Local mean removal followed by division by the Gaussian-weighted local
// standard deviation, floored at the image-wide mean of local deviations.
Signal contrast_normalize(const Signal& image, const ContrastWindow& window = {});

// Sum over signals of 1/2 ||x_i - sum_k d_k * z_ik||^2 + lambda * ||z_i||_1.
double objective(std::span<const Signal> signals, const Dictionary& dict,
                 std::span<const CodeMap> codes, double lambda);

double objective(const Signal& signal, const Dictionary& dict, const CodeMap& codes,
                 double lambda);

// 10 log10(peak^2 / MSE). Returns +infinity for identical inputs.
double psnr(const Signal& reference, const Signal& reconstruction, double peak = 1.0);

// PSNR after rescaling both images with the affine map sending the
// reference's [min, max] onto [0, 1], with peak 1.
double psnr_rescaled(const Signal& reference, const Signal& reconstruction);

// Fraction of coefficients with |z| >= threshold.
double nonzero_fraction(const CodeMap& codes, double threshold = 0.1);

// Throws NumericalError if any entry is NaN or infinite.
void require_finite(const Signal& s, const char* what);

}  // namespace scsc
