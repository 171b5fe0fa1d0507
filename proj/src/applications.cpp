#include <scsc/applications.hpp>
#include <scsc/operators.hpp>
#include <scsc/rng.hpp>

#include <cmath>

namespace scsc {

ObservationMask::ObservationMask(Grid weights) : weights_(std::move(weights)) {
  for (Index i = 0; i < weights_.size(); ++i) {
    const double v = weights_.data()[i];
    if (v != 0.0 && v != 1.0) throw ConfigError("observation mask entries must be 0 or 1");
  }
}

ObservationMask ObservationMask::random(Geometry geometry, double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("observation rate must be in (0, 1]");
  const Index total = geometry.size();
  const Index count = std::clamp<Index>(Index(std::llround(rate * double(total))), 0, total);
  Grid w = Grid::Zero(geometry.height, geometry.width);
  Rng rng = Rng::derive(seed, Stream::observation, 0);
  for (Index j = total - count; j < total; ++j) {
    const Index t = Index(rng.below(std::uint64_t(j) + 1));
    if (w.data()[t] != 0.0)
      w.data()[j] = 1.0;
    else
      w.data()[t] = 1.0;
  }
  return ObservationMask(std::move(w));
}

ObservationMask ObservationMask::full(Geometry geometry) {
  return ObservationMask(Grid::Ones(geometry.height, geometry.width));
}

double ObservationMask::rate() const {
  return weights_.size() ? weights_.sum() / double(weights_.size()) : 0.0;
}

bool ObservationMask::all_observed() const { return (weights_.array() == 1.0).all(); }

CodeMap infer_codes(const Signal& signal, const Dictionary& dict, const AdmmParams& params,
                    double lambda) {
  const Geometry g = geometry_of(signal);
  const SubsampleMask mask = full_mask(g.size(), dict.num_filters());
  const AdmmResult r = solve_codes(signal, dict, mask, lambda, params);
  return upsample(mask, r.codes, dict.num_filters(), g);
}

CodeMap infer_codes(const Signal& signal, const Dictionary& dict, double lambda,
                    int admm_iterations) {
  AdmmParams params = AdmmParams::for_lambda(lambda);
  params.iterations = admm_iterations;
  return infer_codes(signal, dict, params, lambda);
}

InpaintResult inpaint(const Signal& observed, const ObservationMask& omask, const Dictionary& dict,
                      const AdmmParams& params, double lambda, bool paste_observed) {
  require_finite(observed, "observed image");
  const Geometry g = geometry_of(observed);
  if (omask.geometry() != g) throw ShapeError("observation mask geometry differs from image");
  if (omask.weights().sum() == 0.0) throw ConfigError("observation mask has no observed pixels");

  const SubsampleMask mask = full_mask(g.size(), dict.num_filters());
  const MaskedDictOperator op(dict, g, mask, &omask.weights());
  // The data term only sees observed pixels; zero the rest so unobserved
  // garbage in `observed` cannot leak in through A^T x.
  const Signal data = observed.array() * omask.weights().array();

  std::optional<FactorCache> cache;
  if (params.mode == QuadMode::factor_cache) cache = FactorCache::build(op, params.rho, params.factor_cap);
  const AdmmResult r = admm_lasso(op, data, lambda, params, nullptr, cache ? &*cache : nullptr);

  InpaintResult out;
  out.codes = upsample(mask, r.codes, dict.num_filters(), g);
  out.reconstruction = DictOperator(dict, g).apply(out.codes);
  if (paste_observed) {
    const auto& w = omask.weights().array();
    out.reconstruction = (w * observed.array() + (1.0 - w) * out.reconstruction.array()).matrix();
  }
  return out;
}

InpaintResult inpaint(const Signal& observed, const ObservationMask& omask, const Dictionary& dict,
                      double lambda, int admm_iterations, bool paste_observed) {
  AdmmParams params = AdmmParams::for_lambda(lambda);
  params.iterations = admm_iterations;
  return inpaint(observed, omask, dict, params, lambda, paste_observed);
}

}  // namespace scsc
