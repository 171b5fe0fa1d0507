#pragma once

#include <scsc/core.hpp>
#include <scsc/operators.hpp>

#include <Eigen/Cholesky>

#include <optional>

namespace scsc {

struct AdmmParams {
  int iterations = 10;
  double rho = 10.0;
  double alpha = 1.8;
  QuadMode mode = QuadMode::iterative;
  double cg_tol = 1e-4;
  int cg_max_iterations = 100;
  // Largest mask for which (A^T A + rho I) is assembled and factored.
  Index factor_cap = 6000;

  // Defaults with rho = 10 * lambda.
  static AdmmParams for_lambda(double lambda);
  static AdmmParams from_config(const TrainConfig& cfg);
  void validate() const;
};

struct AdmmResult {
  // The split (shrinkage) variable; exactly sparse.
  Vector codes;
  int cg_iterations = 0;
  // Quadratic substeps that stopped at the CG iteration cap.
  int cg_unconverged = 0;
  bool factor_cached = false;
  // lambda >= ||A^T x||_inf: zero is optimal and no iterations were run.
  bool null_solution = false;
};

// Elementwise sign(v) * max(|v| - kappa, 0).
Vector shrinkage(const Vector& v, double kappa);

// Cholesky factor of (A^T A + rho I) for a masked dictionary operator,
// shareable across every signal that uses the same mask.
class FactorCache {
 public:
  // std::nullopt when the mask exceeds `cap` columns.
  static std::optional<FactorCache> build(const MaskedDictOperator& op, double rho, Index cap);

  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }
  Index size() const { return llt_.rows(); }
  double rho() const { return rho_; }

 private:
  Eigen::LLT<Matrix, Eigen::Upper> llt_;
  double rho_ = 0.0;
};

// Dense A^T A for a masked operator (upper triangle filled). Exposed for tests.
Matrix assemble_normal_matrix(const MaskedDictOperator& op);

// Matrix-free CG on (A^T A + rho I) x = b, warm-started from x. Returns the
// iteration count; `converged` reports whether the relative residual reached tol.
template <class Op>
int conjugate_gradient(const Op& op, double rho, const Vector& b, Vector& x, double tol,
                       int max_iterations, bool& converged) {
  auto normal = [&](const Vector& v) -> Vector { return op.adjoint(op.apply(v)) + rho * v; };
  const double bnorm = b.norm();
  converged = true;
  if (bnorm == 0.0) {
    x.setZero();
    return 0;
  }
  Vector r = b - normal(x);
  double rr = r.squaredNorm();
  const double target = tol * tol * bnorm * bnorm;
  if (rr <= target) return 0;
  Vector p = r;
  for (int it = 1; it <= max_iterations; ++it) {
    const Vector q = normal(p);
    const double step = rr / p.dot(q);
    x.noalias() += step * p;
    r.noalias() -= step * q;
    const double rr_next = r.squaredNorm();
    if (rr_next <= target) return it;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  converged = false;
  return max_iterations;
}

// Over-relaxed scaled-form ADMM for min 1/2 ||x - A v||^2 + lambda ||v||_1,
// splitting the L1 term. `op` provides apply/adjoint/cols().
template <class Op>
AdmmResult admm_lasso(const Op& op, const Signal& signal, double lambda, const AdmmParams& params,
                      const Vector* warm, const FactorCache* cache) {
  params.validate();
  if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
  const Index n = op.cols();
  if (warm && warm->size() != n) throw ShapeError("warm start length differs from mask size");
  if (cache && cache->size() != n) throw ShapeError("factor cache built for another mask");

  AdmmResult result;
  result.factor_cached = cache != nullptr;
  const Vector atb = op.adjoint(signal);
  if (n == 0 || atb.lpNorm<Eigen::Infinity>() <= lambda) {
    result.codes = Vector::Zero(n);
    result.null_solution = true;
    return result;
  }

  const double rho = params.rho;
  const double kappa = lambda / rho;
  Vector z = warm ? *warm : Vector::Zero(n);
  Vector u = Vector::Zero(n);
  Vector x = z;
  for (int it = 0; it < params.iterations; ++it) {
    const Vector rhs = atb + rho * (z - u);
    if (cache) {
      x = cache->solve(rhs);
    } else {
      bool converged = true;
      result.cg_iterations +=
          conjugate_gradient(op, rho, rhs, x, params.cg_tol, params.cg_max_iterations, converged);
      if (!converged) ++result.cg_unconverged;
    }
    const Vector relaxed = params.alpha * x + (1.0 - params.alpha) * z;
    Vector z_next = shrinkage(relaxed + u, kappa);
    u += relaxed - z_next;
    z = std::move(z_next);
  }
  result.codes = std::move(z);
  return result;
}

// The masked code subproblem: min 1/2 ||x - D M^T v||^2 + lambda ||v||_1.
// With QuadMode::factor_cache and no cache supplied, one is built when the
// mask fits under params.factor_cap; otherwise CG is used.
AdmmResult solve_codes(const Signal& signal, const Dictionary& dict, const SubsampleMask& mask,
                       double lambda, const AdmmParams& params, const Vector* warm = nullptr,
                       const FactorCache* cache = nullptr);

}  // namespace scsc
