#include <doctest.h>

#include "support.hpp"

#include <cmath>

using namespace scsc;
using namespace scsc::testing;

namespace {

struct Scene {
  Dictionary dict;
  Signal clean;
};

// Sparse synthesis scaled to unit RMS, the working scale of lambda = 0.4.
Scene synthetic_image(std::uint64_t seed, Geometry g = {32, 32}) {
  Dictionary dict = random_dictionary(4, 7, 500 + seed);
  SyntheticCodes s = synthesize_from_dictionary(dict, g, 0.005, 600 + seed);
  s.signal /= std::sqrt(s.signal.squaredNorm() / double(s.signal.size()));
  return {std::move(dict), std::move(s.signal)};
}

double mean_inpaint_psnr(const Scene& sc, double q, int trials) {
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto om = ObservationMask::random(geometry_of(sc.clean), q, 40 + t);
    const Signal observed = sc.clean.array() * om.weights().array();
    sum += psnr_rescaled(sc.clean, inpaint(observed, om, sc.dict).reconstruction);
  }
  return sum / trials;
}

}  // namespace

TEST_CASE("random observation masks") {
  const Geometry g{37, 29};
  for (double q : {0.1, 0.3, 0.5, 0.8, 1.0}) {
    const auto m = ObservationMask::random(g, q, 5);
    CHECK(m.weights().sum() == double(std::llround(q * g.size())));
    CHECK(std::abs(m.rate() - q) <= 2.0 / std::sqrt(double(g.size())));
    CHECK(m.weights() == ObservationMask::random(g, q, 5).weights());
    for (Index i = 0; i < m.weights().size(); ++i) {
      const double v = m.weights().data()[i];
      CHECK((v == 0.0 || v == 1.0));
    }
  }
  CHECK_FALSE(ObservationMask::random(g, 0.5, 5).weights() ==
              ObservationMask::random(g, 0.5, 6).weights());
  CHECK(ObservationMask::random(g, 1.0, 1).all_observed());
  CHECK(ObservationMask::full(g).all_observed());
  CHECK_THROWS_AS(ObservationMask::random(g, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(ObservationMask::random(g, 1.5, 1), ConfigError);
  Grid bad = Grid::Ones(3, 3);
  bad(1, 1) = 0.5;
  CHECK_THROWS_AS(ObservationMask{bad}, ConfigError);
}

TEST_CASE("observation masks are spread uniformly") {
  const Geometry g{20, 20};
  Grid hits = Grid::Zero(20, 20);
  const int trials = 400;
  for (int s = 0; s < trials; ++s) hits += ObservationMask::random(g, 0.25, s).weights();
  // Each pixel is a Binomial(400, 0.25) count: mean 100, sd about 8.7.
  CHECK(hits.minCoeff() > 100 - 5 * 8.7);
  CHECK(hits.maxCoeff() < 100 + 5 * 8.7);
}

TEST_CASE("zero signal gives zero codes") {
  const Dictionary d = random_dictionary(3, 5, 1);
  const CodeMap z = infer_codes(Signal::Zero(12, 12), d, 0.1);
  CHECK(z.coeffs().lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(z.num_filters() == 3);
  CHECK(z.geometry() == Geometry{12, 12});
}

TEST_CASE("inference recovers a synthetic sparse image at small lambda") {
  const Scene sc = synthetic_image(1);
  AdmmParams params = AdmmParams::for_lambda(1e-3);
  params.iterations = 300;
  params.mode = QuadMode::factor_cache;
  const CodeMap z = infer_codes(sc.clean, sc.dict, params, 1e-3);
  const Signal rec = DictOperator(sc.dict, geometry_of(sc.clean)).apply(z);
  CHECK(psnr_rescaled(sc.clean, rec) >= 40.0);
}

TEST_CASE("inference never does worse than zero codes") {
  for (std::uint64_t s = 0; s < 8; ++s) {
    const Signal x = contrast_normalize(synthetic_scene({24, 24}, 11, s));
    const Dictionary d = random_dictionary(4, 5, 20 + s);
    for (double lambda : {0.05, 0.5, 5.0}) {
      const CodeMap z = infer_codes(x, d, lambda);
      const Signal rec = DictOperator(d, geometry_of(x)).apply(z);
      CHECK(0.5 * (x - rec).squaredNorm() <= 0.5 * x.squaredNorm());
    }
  }
}

TEST_CASE("full observation inpainting is exactly inference") {
  const Scene sc = synthetic_image(2);
  const auto full = ObservationMask::full(geometry_of(sc.clean));
  for (QuadMode mode : {QuadMode::iterative, QuadMode::factor_cache}) {
    AdmmParams params = AdmmParams::for_lambda(0.4);
    params.iterations = 50;
    params.mode = mode;
    const InpaintResult r = inpaint(sc.clean, full, sc.dict, params, 0.4);
    const CodeMap z = infer_codes(sc.clean, sc.dict, params, 0.4);
    CHECK(r.codes.coeffs() == z.coeffs());
    CHECK(r.reconstruction == DictOperator(sc.dict, geometry_of(sc.clean)).apply(z));
  }
}

TEST_CASE("unobserved pixels do not influence the fit") {
  const Scene sc = synthetic_image(3);
  const auto om = ObservationMask::random(geometry_of(sc.clean), 0.5, 1);
  Signal garbage = sc.clean;
  for (Index i = 0; i < garbage.size(); ++i)
    if (om.weights().data()[i] == 0.0) garbage.data()[i] = 1e3 * double(i % 7);
  const Signal zero_filled = sc.clean.array() * om.weights().array();
  CHECK(inpaint(garbage, om, sc.dict).reconstruction ==
        inpaint(zero_filled, om, sc.dict).reconstruction);
}

TEST_CASE("pasting observed pixels") {
  const Scene sc = synthetic_image(4);
  const auto om = ObservationMask::random(geometry_of(sc.clean), 0.5, 2);
  const InpaintResult plain = inpaint(sc.clean, om, sc.dict);
  const InpaintResult pasted = inpaint(sc.clean, om, sc.dict, 0.4, 50, true);
  for (Index i = 0; i < sc.clean.size(); ++i) {
    if (om.weights().data()[i] == 1.0)
      CHECK(pasted.reconstruction.data()[i] == sc.clean.data()[i]);
    else
      CHECK(pasted.reconstruction.data()[i] == plain.reconstruction.data()[i]);
  }
}

TEST_CASE("half-observed synthetic images beat the zero-filled input by 3 dB") {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Scene sc = synthetic_image(10 + s);
    double gain = 0.0;
    for (int t = 0; t < 5; ++t) {
      const auto om = ObservationMask::random(geometry_of(sc.clean), 0.5, t);
      const Signal observed = sc.clean.array() * om.weights().array();
      gain += psnr_rescaled(sc.clean, inpaint(observed, om, sc.dict).reconstruction) -
              psnr_rescaled(sc.clean, observed);
    }
    CHECK(gain / 5.0 >= 3.0);
  }
}

TEST_CASE("inpainting quality grows with the observation rate") {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Scene sc = synthetic_image(20 + s);
    const double p3 = mean_inpaint_psnr(sc, 0.3, 5);
    const double p5 = mean_inpaint_psnr(sc, 0.5, 5);
    const double p8 = mean_inpaint_psnr(sc, 0.8, 5);
    CHECK(p3 <= p5);
    CHECK(p5 <= p8);
  }
}

TEST_CASE("inpainting argument checks") {
  const Scene sc = synthetic_image(5);
  CHECK_THROWS_AS(inpaint(sc.clean, ObservationMask(Grid::Zero(32, 32)), sc.dict), ConfigError);
  CHECK_THROWS_AS(inpaint(sc.clean, ObservationMask::full({16, 32}), sc.dict), ShapeError);
  Signal bad = sc.clean;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(inpaint(bad, ObservationMask::full({32, 32}), sc.dict), NumericalError);
}
