#include <doctest.h>

#include "oracle/oracle.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>

using namespace scsc;
using namespace scsc::testing;

namespace {

struct Tiny {
  Geometry g{6, 6};
  Dictionary dict = random_dictionary(2, 3, 101);
  Signal x = random_signal(g, 102);
  double lambda = 0.1;
  SubsampleMask mask = full_mask(36, 2);
  Matrix dense = oracle::materialize_dict_matrix(dict, g);
};

AdmmParams exact_params(double lambda, QuadMode mode) {
  AdmmParams p = AdmmParams::for_lambda(lambda);
  p.iterations = 500;
  p.mode = mode;
  p.cg_tol = 1e-12;
  p.cg_max_iterations = 1000;
  return p;
}

}  // namespace

TEST_CASE("shrinkage closed forms") {
  Vector v(4);
  v << 0.0, 2.0, -0.3, -2.0;
  const Vector s = shrinkage(v, 0.5);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 1.5);
  CHECK(s[2] == 0.0);
  CHECK(s[3] == -1.5);
  CHECK(shrinkage(v, 0.0) == v);
  CHECK_THROWS_AS(shrinkage(v, -0.1), ConfigError);
}

TEST_CASE("shrinkage is the L1 proximal map (subgradient check)") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Vector v(20);
    for (Index i = 0; i < 20; ++i) v[i] = 2.0 * rng.normal();
    const double kappa = rng.uniform();
    const Vector u = shrinkage(v, kappa);
    // 0 in (u - v) + kappa * d|u|.
    for (Index i = 0; i < 20; ++i) {
      if (u[i] != 0.0)
        CHECK(std::abs(u[i] - v[i] + kappa * (u[i] > 0 ? 1.0 : -1.0)) <= 1e-14);
      else
        CHECK(std::abs(v[i]) <= kappa);
    }
  }
}

TEST_CASE("shrinkage is nonexpansive") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Vector a(15), b(15);
    for (Index i = 0; i < 15; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    const double kappa = 0.5 * rng.uniform();
    CHECK((shrinkage(a, kappa) - shrinkage(b, kappa)).norm() <= (a - b).norm() + 1e-15);
  }
}

TEST_CASE("admm params validation") {
  AdmmParams p;
  CHECK_NOTHROW(p.validate());
  p.alpha = 2.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = AdmmParams{};
  p.rho = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = AdmmParams{};
  p.iterations = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK(AdmmParams::for_lambda(0.4).rho == doctest::Approx(4.0));
}

TEST_CASE("null solutions") {
  Tiny t;
  const Vector atx = t.dense.transpose() * oracle::flatten(t.x);
  const double big = 1.01 * atx.lpNorm<Eigen::Infinity>();
  const AdmmResult r = solve_codes(t.x, t.dict, t.mask, big, AdmmParams::for_lambda(big));
  CHECK(r.null_solution);
  CHECK(r.codes.isZero(0.0));

  const AdmmResult z =
      solve_codes(Signal::Zero(6, 6), t.dict, t.mask, 0.1, AdmmParams::for_lambda(0.1));
  CHECK(z.codes.isZero(0.0));
}

TEST_CASE("500-iteration ADMM matches the LASSO oracle on the tiny instance") {
  Tiny t;
  const Vector ref = oracle::lasso_reference(t.dense, oracle::flatten(t.x), t.lambda);
  const double ref_obj = oracle::lasso_objective(t.dense, oracle::flatten(t.x), ref, t.lambda);
  for (QuadMode mode : {QuadMode::iterative, QuadMode::factor_cache}) {
    const AdmmResult r = solve_codes(t.x, t.dict, t.mask, t.lambda, exact_params(t.lambda, mode));
    CHECK(r.factor_cached == (mode == QuadMode::factor_cache));
    const double obj = oracle::lasso_objective(t.dense, oracle::flatten(t.x), r.codes, t.lambda);
    CHECK(std::abs(obj - ref_obj) <= 1e-6 * ref_obj);
  }
}

TEST_CASE("converged ADMM satisfies the LASSO optimality certificate") {
  Tiny t;
  for (QuadMode mode : {QuadMode::iterative, QuadMode::factor_cache}) {
    AdmmParams p = exact_params(t.lambda, mode);
    p.iterations = 2000;
    const AdmmResult r = solve_codes(t.x, t.dict, t.mask, t.lambda, p);
    const Vector g = t.dense.transpose() * (t.dense * r.codes - oracle::flatten(t.x));
    for (Index i = 0; i < g.size(); ++i) {
      if (r.codes[i] != 0.0)
        CHECK(std::abs(g[i] + t.lambda * (r.codes[i] > 0 ? 1.0 : -1.0)) <= 1e-4 * t.lambda);
      else
        CHECK(std::abs(g[i]) <= t.lambda * (1.0 + 1e-4));
    }
  }
}

TEST_CASE("masked ADMM matches the oracle on the masked problem") {
  Tiny t;
  const SubsampleMask mask = sample_mask(36, 2, 0.3, 9, 0);
  const Matrix a = t.dense * oracle::mask_matrix(mask).transpose();
  const Vector ref = oracle::lasso_reference(a, oracle::flatten(t.x), 0.05);
  const double ref_obj = oracle::lasso_objective(a, oracle::flatten(t.x), ref, 0.05);
  const AdmmResult r =
      solve_codes(t.x, t.dict, mask, 0.05, exact_params(0.05, QuadMode::factor_cache));
  CHECK(r.codes.size() == mask.size());
  const double obj = oracle::lasso_objective(a, oracle::flatten(t.x), r.codes, 0.05);
  CHECK(std::abs(obj - ref_obj) <= 1e-6 * ref_obj);
}

TEST_CASE("normal matrix assembly matches the dense product") {
  Tiny t;
  const SubsampleMask mask = sample_mask(36, 2, 0.5, 3, 1);
  Grid w = Grid::Ones(6, 6);
  w(2, 2) = 0.0;
  w(0, 5) = 0.0;
  for (const Grid* obs : {static_cast<const Grid*>(nullptr), static_cast<const Grid*>(&w)}) {
    const MaskedDictOperator op(t.dict, t.g, mask, obs);
    Matrix a = t.dense * oracle::mask_matrix(mask).transpose();
    if (obs) a = Eigen::Map<const Vector>(w.data(), 36).asDiagonal() * a;
    const Matrix expected = a.transpose() * a;
    const Matrix got = assemble_normal_matrix(op);
    const Matrix upper_got = got.triangularView<Eigen::Upper>();
    const Matrix upper_expected = expected.triangularView<Eigen::Upper>();
    CHECK((upper_got - upper_expected).norm() <= 1e-12 * expected.norm());
  }
}

TEST_CASE("factor cache agrees with CG and serves several right-hand sides") {
  const Geometry g{8, 8};
  const Dictionary dict = random_dictionary(3, 3, 7);
  const SubsampleMask mask = sample_mask(g.size(), 3, 0.5, 1, 0);
  const MaskedDictOperator op(dict, g, mask);
  const double rho = 0.7;
  const auto cache = FactorCache::build(op, rho, 6000);
  REQUIRE(cache.has_value());
  CHECK(cache->size() == mask.size());

  Matrix a = oracle::materialize_dict_matrix(dict, g) * oracle::mask_matrix(mask).transpose();
  const Matrix normal = a.transpose() * a + rho * Matrix::Identity(a.cols(), a.cols());
  for (std::uint64_t s = 0; s < 4; ++s) {
    const Vector b = a.transpose() * flat(random_signal(g, 50 + s));
    const Vector direct = normal.ldlt().solve(b);
    const Vector cached = cache->solve(b);
    Vector iter = Vector::Zero(b.size());
    bool converged = false;
    conjugate_gradient(op, rho, b, iter, 1e-13, 1000, converged);
    CHECK(converged);
    CHECK(rel_diff(cached, direct) <= 1e-10);
    CHECK(rel_diff(cached, iter) <= 1e-8);
  }

  // Same mask, four signals: one cache, four solves, each equal to its own
  // uncached run.
  AdmmParams p = AdmmParams::for_lambda(0.2);
  p.mode = QuadMode::factor_cache;
  const auto shared = FactorCache::build(op, p.rho, p.factor_cap);
  for (std::uint64_t s = 0; s < 4; ++s) {
    const Signal x = random_signal(g, 80 + s);
    const AdmmResult with = solve_codes(x, dict, mask, 0.2, p, nullptr, &*shared);
    const AdmmResult own = solve_codes(x, dict, mask, 0.2, p);
    CHECK(with.factor_cached);
    CHECK(rel_diff(with.codes, own.codes) <= 1e-12);
  }
}

TEST_CASE("larger rho gives a smaller quadratic-substep solution") {
  const Geometry g{8, 8};
  const Dictionary dict = random_dictionary(2, 3, 9);
  const SubsampleMask mask = full_mask(g.size(), 2);
  const MaskedDictOperator op(dict, g, mask);
  const Vector b = op.adjoint(random_signal(g, 10));
  double previous = 1e300;
  for (double rho : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    const double n = FactorCache::build(op, rho, 6000)->solve(b).norm();
    CHECK(n < previous);
    previous = n;
  }
}

TEST_CASE("factor cache respects its size cap and solve_codes falls back to CG") {
  const Geometry g{8, 8};
  const Dictionary dict = random_dictionary(2, 3, 11);
  const SubsampleMask mask = full_mask(g.size(), 2);
  const MaskedDictOperator op(dict, g, mask);
  CHECK_FALSE(FactorCache::build(op, 1.0, 100).has_value());
  AdmmParams p = AdmmParams::for_lambda(0.1);
  p.mode = QuadMode::factor_cache;
  p.factor_cap = 100;
  const AdmmResult r = solve_codes(random_signal(g, 1), dict, mask, 0.1, p);
  CHECK_FALSE(r.factor_cached);
  CHECK(r.cg_iterations > 0);
}

TEST_CASE("solve_codes argument checks") {
  Tiny t;
  const AdmmParams p = AdmmParams::for_lambda(0.1);
  const Vector bad(5);
  CHECK_THROWS_AS(solve_codes(t.x, t.dict, t.mask, 0.1, p, &bad), ShapeError);
  CHECK_THROWS_AS(solve_codes(t.x, t.dict, t.mask, 0.0, p), ConfigError);
  CHECK_THROWS_AS(solve_codes(t.x, t.dict, sample_mask(25, 2, 1.0, 0, 0), 0.1, p), ShapeError);
  const MaskedDictOperator op(t.dict, t.g, t.mask);
  const auto cache = FactorCache::build(op, 5.0, 6000);
  CHECK_THROWS_AS(solve_codes(t.x, t.dict, t.mask, 0.1, p, nullptr, &*cache), ConfigError);
  Signal nan = t.x;
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(solve_codes(nan, t.dict, t.mask, 0.1, p), NumericalError);
}

TEST_CASE("CG iteration cap is reported, not fatal") {
  Tiny t;
  AdmmParams p = AdmmParams::for_lambda(0.1);
  p.cg_max_iterations = 1;
  p.cg_tol = 1e-14;
  const AdmmResult r = solve_codes(t.x, t.dict, t.mask, 0.1, p);
  CHECK(r.cg_unconverged > 0);
  CHECK(r.codes.allFinite());
}

TEST_CASE("warm start is used") {
  Tiny t;
  AdmmParams p = exact_params(t.lambda, QuadMode::factor_cache);
  const Vector opt = solve_codes(t.x, t.dict, t.mask, t.lambda, p).codes;
  p.iterations = 1;
  const Vector cold = solve_codes(t.x, t.dict, t.mask, t.lambda, p).codes;
  const Vector warm = solve_codes(t.x, t.dict, t.mask, t.lambda, p, &opt).codes;
  CHECK((warm - opt).norm() < (cold - opt).norm());
}

TEST_CASE("the 10-iteration budget is within 5% of the 500-iteration objective") {
  const Signal x = contrast_normalize(synthetic_scene({48, 48}, 3, 0));
  const Dictionary dict = random_dictionary(16, 7, 12);
  const SubsampleMask mask = full_mask(x.size(), 16);
  const double lambda = 1.0;
  AdmmParams p = AdmmParams::for_lambda(lambda);
  const AdmmResult fast = solve_codes(x, dict, mask, lambda, p);
  p.iterations = 500;
  const AdmmResult slow = solve_codes(x, dict, mask, lambda, p);
  const Geometry g = geometry_of(x);
  const double f10 = objective(x, dict, upsample(mask, fast.codes, 16, g), lambda);
  const double f500 = objective(x, dict, upsample(mask, slow.codes, 16, g), lambda);
  MESSAGE("10-iteration objective " << f10 << ", 500-iteration " << f500);
  CHECK(f10 <= 1.05 * f500);
}

TEST_CASE("a code solve at p = 0.1 takes at most a third of the time at p = 1") {
  const Signal x = contrast_normalize(synthetic_scene({64, 64}, 4, 0));
  const Dictionary dict = random_dictionary(32, 7, 13);
  const AdmmParams p = AdmmParams::for_lambda(1.0);
  auto best_time = [&](double rate) {
    const SubsampleMask mask = sample_mask(x.size(), 32, rate, 1, 0);
    double best = 1e9;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const AdmmResult r = solve_codes(x, dict, mask, 1.0, p);
      const auto t1 = std::chrono::steady_clock::now();
      CHECK(r.codes.allFinite());
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
  };
  const double full = best_time(1.0), tenth = best_time(0.1);
  MESSAGE("p=1: " << full << " s, p=0.1: " << tenth << " s");
  CHECK(tenth <= full / 3.0);
}
