#include <scsc/operators.hpp>

#include "kernels.hpp"

#include <cmath>
#include <string>

namespace scsc {

namespace {

void check_codes(const CodeMap& codes, int num_filters, Geometry g) {
  if (codes.num_filters() != num_filters) throw ShapeError("code map filter count mismatch");
  if (codes.geometry() != g) throw ShapeError("code map geometry mismatch");
}

void check_signal(const Signal& s, Geometry g) {
  if (s.rows() != g.height || s.cols() != g.width) throw ShapeError("signal geometry mismatch");
}

}  // namespace

// DictOperator ---------------------------------------------------------------

DictOperator::DictOperator(const Dictionary& dict, Geometry geometry)
    : dict_(&dict), geometry_(geometry) {
  if (geometry.height < 1 || geometry.width < 1) throw ShapeError("empty signal geometry");
}

Signal DictOperator::apply(const CodeMap& codes) const {
  check_codes(codes, dict_->num_filters(), geometry_);
  const int h = geometry_.height, w = geometry_.width, m = dict_->side();
  Signal out = Signal::Zero(h, w);
  const double* z = codes.coeffs().data();
  for (int k = 0; k < dict_->num_filters(); ++k) {
    const double* f = dict_->filter_data(k);
    const double* zk = z + k * geometry_.size();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = zk[y * w + x];
        if (v != 0.0) detail::scatter_add(out.data(), h, w, f, m, y, x, v);
      }
  }
  return out;
}

CodeMap DictOperator::adjoint(const Signal& residual) const {
  check_signal(residual, geometry_);
  const int h = geometry_.height, w = geometry_.width, m = dict_->side();
  CodeMap out(dict_->num_filters(), geometry_);
  double* z = out.coeffs().data();
  for (int k = 0; k < dict_->num_filters(); ++k) {
    const double* f = dict_->filter_data(k);
    double* zk = z + k * geometry_.size();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        zk[y * w + x] = detail::gather_dot(residual.data(), h, w, f, m, y, x);
  }
  return out;
}

// CodeOperator ---------------------------------------------------------------

CodeOperator::CodeOperator(const CodeMap& codes, int filter_side)
    : num_filters_(codes.num_filters()), side_(filter_side), geometry_(codes.geometry()) {
  if (filter_side < 1 || filter_side % 2 == 0) throw ConfigError("filter side must be odd");
  offsets_.reserve(num_filters_ + 1);
  offsets_.push_back(0);
  const int w = geometry_.width;
  for (int k = 0; k < num_filters_; ++k) {
    const double* zk = codes.coeffs().data() + k * geometry_.size();
    for (Index i = 0; i < geometry_.size(); ++i)
      if (zk[i] != 0.0) entries_.push_back({int(i / w), int(i % w), zk[i]});
    offsets_.push_back(entries_.size());
  }
}

void CodeOperator::apply_block_add(int k, const double* filter, double scale, Signal& out) const {
  const int h = geometry_.height, w = geometry_.width;
  for (const Entry& e : entries(k))
    detail::scatter_add(out.data(), h, w, filter, side_, e.y, e.x, scale * e.value);
}

void CodeOperator::adjoint_block(int k, const Signal& residual, double* out) const {
  const int h = geometry_.height, w = geometry_.width;
  for (const Entry& e : entries(k))
    detail::gather_patch_add(residual.data(), h, w, side_, e.y, e.x, e.value, out);
}

Signal CodeOperator::apply(const Vector& filters) const {
  const Index m2 = Index(side_) * side_;
  if (filters.size() != m2 * num_filters_) throw ShapeError("filter vector length mismatch");
  Signal out = Signal::Zero(geometry_.height, geometry_.width);
  for (int k = 0; k < num_filters_; ++k) apply_block_add(k, filters.data() + k * m2, 1.0, out);
  return out;
}

Vector CodeOperator::adjoint(const Signal& residual) const {
  check_signal(residual, geometry_);
  const Index m2 = Index(side_) * side_;
  Vector out = Vector::Zero(m2 * num_filters_);
  for (int k = 0; k < num_filters_; ++k) adjoint_block(k, residual, out.data() + k * m2);
  return out;
}

// Masks ----------------------------------------------------------------------

SubsampleMask sample_mask(Index signal_size, int num_filters, double rate, std::uint64_t seed,
                          std::uint64_t iteration) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("subsample rate must be in (0, 1]");
  const Index total = signal_size * num_filters;
  if (total < 1) throw ShapeError("empty code space");

  SubsampleMask mask;
  mask.total = total;
  mask.rate = rate;
  mask.seed = seed;
  mask.iteration = iteration;

  // ceil(p*D*K), guarding against 0.1 * 100 = 10.000000000000002.
  const double exact = rate * double(total);
  Index count = Index(std::ceil(exact));
  if (count > 1 && double(count - 1) >= exact * (1.0 - 1e-12)) --count;
  count = std::clamp<Index>(count, 1, total);

  mask.indices.reserve(count);
  if (count == total) {
    for (Index i = 0; i < total; ++i) mask.indices.push_back(i);
    return mask;
  }

  // Floyd's algorithm: exactly `count` distinct draws, uniform over subsets.
  Rng rng = Rng::derive(seed, Stream::subsample_mask, iteration);
  std::vector<unsigned char> taken(std::size_t(total), 0);
  for (Index j = total - count; j < total; ++j) {
    const Index t = Index(rng.below(std::uint64_t(j) + 1));
    if (taken[t])
      taken[j] = 1;
    else
      taken[t] = 1;
  }
  for (Index i = 0; i < total; ++i)
    if (taken[i]) mask.indices.push_back(i);
  return mask;
}

SubsampleMask full_mask(Index signal_size, int num_filters) {
  return sample_mask(signal_size, num_filters, 1.0, 0, 0);
}

Vector subsample(const SubsampleMask& mask, const CodeMap& codes) {
  if (codes.size() != mask.total) throw ShapeError("mask and code map sizes differ");
  Vector out(mask.size());
  for (Index j = 0; j < mask.size(); ++j) out[j] = codes.coeffs()[mask.indices[j]];
  return out;
}

CodeMap upsample(const SubsampleMask& mask, const Vector& reduced, int num_filters,
                 Geometry geometry) {
  if (reduced.size() != mask.size()) throw ShapeError("reduced vector length differs from mask");
  if (Index(num_filters) * geometry.size() != mask.total)
    throw ShapeError("mask was drawn for a different code space");
  CodeMap out(num_filters, geometry);
  for (Index j = 0; j < mask.size(); ++j) out.coeffs()[mask.indices[j]] = reduced[j];
  return out;
}

// MaskedDictOperator ---------------------------------------------------------

MaskedDictOperator::MaskedDictOperator(const Dictionary& dict, Geometry geometry,
                                       const SubsampleMask& mask, const Grid* observation)
    : dict_(&dict), geometry_(geometry), observation_(observation) {
  const Index d = geometry.size();
  if (mask.total != d * dict.num_filters())
    throw ShapeError("mask was drawn for a different code space");
  if (observation && (observation->rows() != geometry.height || observation->cols() != geometry.width))
    throw ShapeError("observation mask geometry mismatch");
  cols_.reserve(mask.indices.size());
  for (const std::int64_t idx : mask.indices) {
    const Index k = idx / d;
    const Index pos = idx % d;
    cols_.push_back({int(k), int(pos / geometry.width), int(pos % geometry.width)});
  }
}

Signal MaskedDictOperator::apply(const Vector& reduced) const {
  if (reduced.size() != cols()) throw ShapeError("reduced vector length mismatch");
  const int h = geometry_.height, w = geometry_.width, m = dict_->side();
  Signal out = Signal::Zero(h, w);
  for (Index j = 0; j < cols(); ++j) {
    const double v = reduced[j];
    if (v == 0.0) continue;
    const Column& c = cols_[j];
    detail::scatter_add(out.data(), h, w, dict_->filter_data(c.k), m, c.y, c.x, v);
  }
  if (observation_) out.array() *= observation_->array();
  return out;
}

Vector MaskedDictOperator::adjoint(const Signal& residual) const {
  check_signal(residual, geometry_);
  const int h = geometry_.height, w = geometry_.width, m = dict_->side();
  const double* r = residual.data();
  Signal weighted;
  if (observation_) {
    weighted = residual.array() * observation_->array();
    r = weighted.data();
  }
  Vector out(cols());
  for (Index j = 0; j < cols(); ++j) {
    const Column& c = cols_[j];
    out[j] = detail::gather_dot(r, h, w, dict_->filter_data(c.k), m, c.y, c.x);
  }
  return out;
}

}  // namespace scsc
