#include <scsc/core.hpp>
#include <scsc/operators.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace scsc {

Dictionary::Dictionary(int num_filters, int side)
    : Dictionary(num_filters, side, Vector::Zero(Index(num_filters) * side * side)) {}

Dictionary::Dictionary(int num_filters, int side, Vector coeffs)
    : num_filters_(num_filters), side_(side), coeffs_(std::move(coeffs)) {
  if (num_filters < 1) throw ConfigError("dictionary needs at least one filter");
  if (side < 1 || side % 2 == 0) throw ConfigError("filter side must be odd and positive");
  if (coeffs_.size() != Index(num_filters) * side * side)
    throw ShapeError("dictionary coefficient count does not match K*m*m");
}

double Dictionary::max_filter_norm() const {
  double worst = 0.0;
  for (int k = 0; k < num_filters_; ++k) worst = std::max(worst, filter(k).norm());
  return worst;
}

void Dictionary::project_to_unit_ball() {
  for (int k = 0; k < num_filters_; ++k) {
    const double n = filter(k).norm();
    if (n > 1.0) filter(k) /= n;
  }
}

CodeMap::CodeMap(int num_filters, Geometry geometry)
    : CodeMap(num_filters, geometry, Vector::Zero(Index(num_filters) * geometry.size())) {}

CodeMap::CodeMap(int num_filters, Geometry geometry, Vector coeffs)
    : num_filters_(num_filters), geometry_(geometry), coeffs_(std::move(coeffs)) {
  if (num_filters < 1) throw ConfigError("code map needs at least one filter");
  if (geometry.height < 1 || geometry.width < 1) throw ShapeError("empty code geometry");
  if (coeffs_.size() != Index(num_filters) * geometry.size())
    throw ShapeError("code coefficient count does not match K*H*W");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (num_filters < 1) fail("number of filters must be >= 1");
  if (filter_side < 1 || filter_side % 2 == 0) fail("filter size must be odd and positive");
  if (!(lambda > 0.0)) fail("lambda must be > 0");
  if (!(subsample_rate > 0.0 && subsample_rate <= 1.0)) fail("subsample rate must be in (0, 1]");
  if (admm_iterations < 1) fail("ADMM iterations must be >= 1");
  if (!(effective_rho() > 0.0)) fail("rho must be > 0");
  if (!(alpha > 0.0 && alpha < 2.0)) fail("alpha must be in (0, 2)");
  if (minibatch < 1) fail("mini-batch size must be >= 1");
  if (max_outer < 1) fail("max outer iterations must be >= 1");
  if (!(tol >= 0.0)) fail("tolerance must be >= 0");
  if (!(cg_tol > 0.0)) fail("CG tolerance must be > 0");
  if (cg_max_iterations < 1) fail("CG iteration cap must be >= 1");
  if (filter_sweeps < 1) fail("filter sweeps must be >= 1");
  if (workers < 0) fail("worker count must be >= 0");
}

void require_finite(const Signal& s, const char* what) {
  if (!s.allFinite()) throw NumericalError(std::string(what) + " contains non-finite values");
}

Signal contrast_normalize(const Signal& image, const ContrastWindow& window) {
  require_finite(image, "image");
  if (window.radius < 1) throw ConfigError("contrast window radius must be >= 1");
  if (!(window.sigma > 0.0)) throw ConfigError("contrast window sigma must be > 0");

  const int h = int(image.rows());
  const int w = int(image.cols());
  const int r = window.radius;
  const int span = 2 * r + 1;
  std::vector<double> weight(std::size_t(span) * span);
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      weight[(dy + r) * span + (dx + r)] =
          std::exp(-double(dy * dy + dx * dx) / (2.0 * window.sigma * window.sigma));

  // Weighted local averages with weights renormalized over in-bounds pixels.
  // Written as sum w(q) * (x(p) - x(q)) so a constant patch cancels exactly.
  Signal centered(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double center = image(y, x);
      double acc = 0.0, wsum = 0.0;
      for (int dy = std::max(-r, -y); dy <= std::min(r, h - 1 - y); ++dy) {
        for (int dx = std::max(-r, -x); dx <= std::min(r, w - 1 - x); ++dx) {
          const double wt = weight[(dy + r) * span + (dx + r)];
          acc += wt * (center - image(y + dy, x + dx));
          wsum += wt;
        }
      }
      centered(y, x) = acc / wsum;
    }
  }

  Signal local_std(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int dy = std::max(-r, -y); dy <= std::min(r, h - 1 - y); ++dy) {
        for (int dx = std::max(-r, -x); dx <= std::min(r, w - 1 - x); ++dx) {
          const double wt = weight[(dy + r) * span + (dx + r)];
          const double v = centered(y + dy, x + dx);
          acc += wt * v * v;
          wsum += wt;
        }
      }
      local_std(y, x) = std::sqrt(acc / wsum);
    }
  }

  const double floor = local_std.mean();
  Signal out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double denom = std::max(local_std(y, x), floor);
      out(y, x) = denom > 0.0 ? centered(y, x) / denom : 0.0;
    }
  }
  return out;
}

double objective(const Signal& signal, const Dictionary& dict, const CodeMap& codes,
                 double lambda) {
  const Geometry g = geometry_of(signal);
  if (codes.geometry() != g) throw ShapeError("code map geometry differs from signal");
  if (codes.num_filters() != dict.num_filters())
    throw ShapeError("code map filter count differs from dictionary");
  const DictOperator op(dict, g);
  const Signal residual = signal - op.apply(codes);
  return 0.5 * residual.squaredNorm() + lambda * codes.coeffs().lpNorm<1>();
}

double objective(std::span<const Signal> signals, const Dictionary& dict,
                 std::span<const CodeMap> codes, double lambda) {
  if (signals.size() != codes.size()) throw ShapeError("signal and code lists differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < signals.size(); ++i)
    total += objective(signals[i], dict, codes[i], lambda);
  return total;
}

double psnr(const Signal& reference, const Signal& reconstruction, double peak) {
  if (reference.rows() != reconstruction.rows() || reference.cols() != reconstruction.cols())
    throw ShapeError("psnr arguments differ in shape");
  if (reference.size() == 0) throw ShapeError("psnr of empty images");
  const double mse = (reference - reconstruction).squaredNorm() / double(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr_rescaled(const Signal& reference, const Signal& reconstruction) {
  const double lo = reference.minCoeff();
  const double range = reference.maxCoeff() - lo;
  if (!(range > 0.0)) return psnr(reference, reconstruction, 1.0);
  // Shared affine map: the offset cancels in the difference, only the scale matters.
  return psnr(reference / range, reconstruction / range, 1.0);
}

double nonzero_fraction(const CodeMap& codes, double threshold) {
  if (!(threshold >= 0.0)) throw ConfigError("nonzero threshold must be >= 0");
  if (codes.size() == 0) return 0.0;
  const Index count = (codes.coeffs().array().abs() >= threshold).count();
  return double(count) / double(codes.size());
}

}  // namespace scsc
