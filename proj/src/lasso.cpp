#include <scsc/lasso.hpp>

#include "kernels.hpp"

#include <cmath>

namespace scsc {

AdmmParams AdmmParams::for_lambda(double lambda) {
  AdmmParams p;
  p.rho = 10.0 * lambda;
  return p;
}

AdmmParams AdmmParams::from_config(const TrainConfig& cfg) {
  AdmmParams p;
  p.iterations = cfg.admm_iterations;
  p.rho = cfg.effective_rho();
  p.alpha = cfg.alpha;
  p.mode = cfg.quad_mode;
  p.cg_tol = cfg.cg_tol;
  p.cg_max_iterations = cfg.cg_max_iterations;
  p.factor_cap = cfg.factor_cap;
  return p;
}

void AdmmParams::validate() const {
  if (iterations < 1) throw ConfigError("ADMM iterations must be >= 1");
  if (!(rho > 0.0)) throw ConfigError("ADMM penalty rho must be > 0");
  if (!(alpha > 0.0 && alpha < 2.0)) throw ConfigError("over-relaxation alpha must be in (0, 2)");
  if (!(cg_tol > 0.0)) throw ConfigError("CG tolerance must be > 0");
  if (cg_max_iterations < 1) throw ConfigError("CG iteration cap must be >= 1");
}

Vector shrinkage(const Vector& v, double kappa) {
  if (!(kappa >= 0.0)) throw ConfigError("shrinkage threshold must be >= 0");
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - kappa;
    out[i] = a > 0.0 ? std::copysign(a, v[i]) : 0.0;
  }
  return out;
}

Matrix assemble_normal_matrix(const MaskedDictOperator& op) {
  const Geometry g = op.geometry();
  const int h = g.height, w = g.width;
  const Dictionary& dict = op.dictionary();
  const int m = dict.side();
  const Grid* obs = op.observation();
  const auto& cols = op.columns();
  const Index n = Index(cols.size());

  // Rows of A grouped by pixel (CSR), columns ascending within a row.
  std::vector<Index> start(std::size_t(g.size()) + 1, 0);
  for (const auto& c : cols) {
    const auto f = detail::footprint(c.y, c.x, m, h, w);
    for (int a = f.a_begin; a < f.a_end; ++a)
      for (int b = f.b_begin; b < f.b_end; ++b) ++start[(f.dy + a) * w + (f.dx + b) + 1];
  }
  for (Index p = 0; p < g.size(); ++p) start[p + 1] += start[p];
  std::vector<Index> fill(start.begin(), start.end() - 1);
  std::vector<Index> col_of(start.back());
  std::vector<double> val_of(start.back());
  for (Index j = 0; j < n; ++j) {
    const auto& c = cols[j];
    const double* filt = dict.filter_data(c.k);
    const auto f = detail::footprint(c.y, c.x, m, h, w);
    for (int a = f.a_begin; a < f.a_end; ++a)
      for (int b = f.b_begin; b < f.b_end; ++b) {
        const int y = f.dy + a, x = f.dx + b;
        const Index p = Index(y) * w + x;
        double v = filt[a * m + b];
        if (obs) v *= (*obs)(y, x);
        col_of[fill[p]] = j;
        val_of[fill[p]++] = v;
      }
  }

  Matrix gram = Matrix::Zero(n, n);
  for (Index p = 0; p < g.size(); ++p) {
    for (Index s = start[p]; s < start[p + 1]; ++s) {
      const Index ci = col_of[s];
      const double vi = val_of[s];
      if (vi == 0.0) continue;
      double* column_i = gram.data();
      for (Index t = s; t < start[p + 1]; ++t)
        column_i[col_of[t] * n + ci] += vi * val_of[t];
    }
  }
  return gram;
}

std::optional<FactorCache> FactorCache::build(const MaskedDictOperator& op, double rho,
                                              Index cap) {
  if (!(rho > 0.0)) throw ConfigError("rho must be > 0");
  if (op.cols() > cap) return std::nullopt;
  Matrix normal = assemble_normal_matrix(op);
  normal.diagonal().array() += rho;
  FactorCache cache;
  cache.llt_.compute(normal);
  if (cache.llt_.info() != Eigen::Success)
    throw NumericalError("Cholesky factorization of the ADMM normal matrix failed");
  cache.rho_ = rho;
  return cache;
}

AdmmResult solve_codes(const Signal& signal, const Dictionary& dict, const SubsampleMask& mask,
                       double lambda, const AdmmParams& params, const Vector* warm,
                       const FactorCache* cache) {
  require_finite(signal, "signal");
  const MaskedDictOperator op(dict, geometry_of(signal), mask);
  std::optional<FactorCache> local;
  if (!cache && params.mode == QuadMode::factor_cache) {
    local = FactorCache::build(op, params.rho, params.factor_cap);
    if (local) cache = &*local;
  }
  if (cache && cache->rho() != params.rho)
    throw ConfigError("factor cache was built for a different rho");
  return admm_lasso(op, signal, lambda, params, warm, cache);
}

}  // namespace scsc
