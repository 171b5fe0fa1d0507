#include <scsc/filter_update.hpp>
#include <scsc/operators.hpp>
#include <scsc/rng.hpp>

#include "kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace scsc {

namespace {

// Solution of the secular equation sum_i gamma_i^2 / (lambda_i + mu)^2 = 1.
Vector ball_solution_from_eigen(const Matrix& hessian, const Vector& linear,
                                const Vector& previous) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(hessian);
  const Vector& eval = es.eigenvalues();
  const Matrix& evec = es.eigenvectors();
  const Vector gamma = evec.transpose() * linear;
  const double top = std::max(eval.maxCoeff(), 0.0);
  const double thr = 1e-12 * top;
  const double gnorm = linear.norm();

  double null_gamma2 = 0.0, pinv_norm2 = 0.0;
  for (Index i = 0; i < eval.size(); ++i) {
    if (eval[i] > thr)
      pinv_norm2 += gamma[i] * gamma[i] / (eval[i] * eval[i]);
    else
      null_gamma2 += gamma[i] * gamma[i];
  }

  if (null_gamma2 <= 1e-24 * gnorm * gnorm && pinv_norm2 <= 1.0) {
    // Optimum set is the pseudo-inverse solution plus anything in the null
    // space that keeps the norm <= 1; keep as much of `previous` as fits.
    Vector f = Vector::Zero(linear.size());
    Vector null_part = Vector::Zero(linear.size());
    for (Index i = 0; i < eval.size(); ++i) {
      if (eval[i] > thr)
        f += (gamma[i] / eval[i]) * evec.col(i);
      else
        null_part += evec.col(i).dot(previous) * evec.col(i);
    }
    const double room = std::sqrt(std::max(0.0, 1.0 - pinv_norm2));
    const double nn = null_part.norm();
    if (nn > room) null_part *= room / nn;
    return f + null_part;
  }

  auto norm2_at = [&](double mu) {
    double s = 0.0;
    for (Index i = 0; i < eval.size(); ++i) {
      const double d = std::max(eval[i], 0.0) + mu;
      s += gamma[i] * gamma[i] / (d * d);
    }
    return s;
  };
  double lo = 0.0, hi = std::max(gnorm, 1e-300);
  double mu = 0.5 * hi;
  for (int it = 0; it < 200; ++it) {
    const double s = norm2_at(mu);
    if (std::abs(std::sqrt(s) - 1.0) <= 1e-14) break;
    if (s > 1.0)
      lo = mu;
    else
      hi = mu;
    // Newton on 1/||f(mu)|| - 1, which is close to linear in mu.
    double ds = 0.0;
    for (Index i = 0; i < eval.size(); ++i) {
      const double d = std::max(eval[i], 0.0) + mu;
      ds -= 2.0 * gamma[i] * gamma[i] / (d * d * d);
    }
    const double nf = std::sqrt(s);
    const double phi = 1.0 / nf - 1.0;
    const double dphi = -0.5 * ds / (s * nf);
    double next = mu - phi / dphi;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-16 * hi) break;
    mu = next;
  }
  Vector f = Vector::Zero(linear.size());
  for (Index i = 0; i < eval.size(); ++i)
    f += (gamma[i] / (std::max(eval[i], 0.0) + mu)) * evec.col(i);
  return f;
}

void clamp_to_ball(Vector& f) {
  const double n = f.norm();
  if (n > 1.0) f /= n;
}

}  // namespace

Vector minimize_quadratic_on_ball(const Matrix& hessian, const Vector& linear,
                                  const Vector& previous) {
  const Index n = linear.size();
  if (hessian.rows() != n || hessian.cols() != n || previous.size() != n)
    throw ShapeError("block quadratic dimensions disagree");

  Eigen::LLT<Matrix> llt(hessian);
  if (llt.info() != Eigen::Success) {
    Vector f = ball_solution_from_eigen(hessian, linear, previous);
    clamp_to_ball(f);
    return f;
  }
  Vector f = llt.solve(linear);
  if (!f.allFinite()) {
    f = ball_solution_from_eigen(hessian, linear, previous);
    clamp_to_ball(f);
    return f;
  }
  if (f.norm() <= 1.0) return f;

  // Constraint active: find mu > 0 with ||(H + mu I)^{-1} g|| = 1.
  double lo = 0.0, hi = std::max(linear.norm(), 1e-300);
  double mu = 0.0;
  Matrix shifted = hessian;
  for (int it = 0; it < 100; ++it) {
    const double nf = f.norm();
    if (std::abs(nf - 1.0) <= 1e-13) break;
    if (nf > 1.0)
      lo = mu;
    else
      hi = mu;
    const Vector w = llt.matrixL().solve(f);
    double next = mu + (nf / w.norm()) * (nf / w.norm()) * (nf - 1.0);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-15 * hi) break;
    mu = next;
    shifted = hessian;
    shifted.diagonal().array() += mu;
    llt.compute(shifted);
    if (llt.info() != Eigen::Success) {
      f = ball_solution_from_eigen(hessian, linear, previous);
      break;
    }
    f = llt.solve(linear);
  }
  clamp_to_ball(f);
  return f;
}

// Batch update --------------------------------------------------------------

namespace {

// Pixel-indexed rows of Z restricted to the entries of one code map, in CSR
// form. Column index is k*M + (a*m + b).
struct PixelRows {
  std::vector<Index> start;
  std::vector<Index> col;
  std::vector<double> val;
};

PixelRows build_pixel_rows(const CodeOperator& op) {
  const Geometry g = op.geometry();
  const int h = g.height, w = g.width, m = op.filter_side();
  const Index m2 = Index(m) * m;
  PixelRows rows;
  rows.start.assign(std::size_t(g.size()) + 1, 0);
  for (int k = 0; k < op.num_filters(); ++k)
    for (const auto& e : op.entries(k)) {
      const auto f = detail::footprint(e.y, e.x, m, h, w);
      for (int a = f.a_begin; a < f.a_end; ++a)
        for (int b = f.b_begin; b < f.b_end; ++b) ++rows.start[(f.dy + a) * w + (f.dx + b) + 1];
    }
  for (Index p = 0; p < g.size(); ++p) rows.start[p + 1] += rows.start[p];
  std::vector<Index> fill(rows.start.begin(), rows.start.end() - 1);
  rows.col.resize(rows.start.back());
  rows.val.resize(rows.start.back());
  for (int k = 0; k < op.num_filters(); ++k)
    for (const auto& e : op.entries(k)) {
      const auto f = detail::footprint(e.y, e.x, m, h, w);
      for (int a = f.a_begin; a < f.a_end; ++a)
        for (int b = f.b_begin; b < f.b_end; ++b) {
          const Index p = Index(f.dy + a) * w + (f.dx + b);
          rows.col[fill[p]] = k * m2 + a * m + b;
          rows.val[fill[p]++] = e.value;
        }
    }
  return rows;
}

}  // namespace

void accumulate_gram(const CodeMap& codes, const Signal& signal, int filter_side, double weight,
                     Matrix& gram, Vector& corr) {
  const Geometry g = codes.geometry();
  if (geometry_of(signal) != g) throw ShapeError("signal and code geometry differ");
  const Index km = Index(codes.num_filters()) * filter_side * filter_side;
  if (gram.rows() != km || gram.cols() != km || corr.size() != km)
    throw ShapeError("surrogate dimensions differ from K*M");
  const CodeOperator op(codes, filter_side);
  const PixelRows rows = build_pixel_rows(op);
  const double* x = signal.data();
  double* gd = gram.data();
  for (Index p = 0; p < g.size(); ++p) {
    const Index s0 = rows.start[p], s1 = rows.start[p + 1];
    if (s0 == s1) continue;
    const double xp = weight * x[p];
    for (Index s = s0; s < s1; ++s) {
      const Index ci = rows.col[s];
      const double vi = rows.val[s];
      corr[ci] += xp * vi;
      double* column = gd + ci * km;
      // weight * (vi * vt) keeps C bit-exactly symmetric.
      for (Index t = s0; t < s1; ++t) column[rows.col[t]] += weight * (vi * rows.val[t]);
    }
  }
}

Dictionary update_filters_batch(std::span<const CodeMap> codes, std::span<const Signal> signals,
                                const Dictionary& init, int sweeps, FilterUpdateReport* report) {
  if (codes.size() != signals.size()) throw ShapeError("code and signal lists differ in length");
  if (sweeps < 1) throw ConfigError("filter sweeps must be >= 1");
  const int num_k = init.num_filters();
  const int m = init.side();
  const Index m2 = init.filter_size();
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i].num_filters() != num_k) throw ShapeError("code map filter count mismatch");
    if (codes[i].geometry() != geometry_of(signals[i]))
      throw ShapeError("code map geometry differs from its signal");
  }

  Dictionary dict = init;
  std::vector<CodeOperator> ops;
  std::vector<Signal> residual;
  ops.reserve(codes.size());
  residual.reserve(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    ops.emplace_back(codes[i], m);
    residual.push_back(signals[i] - ops.back().apply(dict.coeffs()));
  }

  // Per-filter Gram blocks H_k = sum_i Z_ik^T Z_ik.
  std::vector<Matrix> blocks(num_k, Matrix::Zero(m2, m2));
  for (const auto& op : ops) {
    const PixelRows rows = build_pixel_rows(op);
    for (std::size_t p = 0; p + 1 < rows.start.size(); ++p) {
      const Index s0 = rows.start[p], s1 = rows.start[p + 1];
      // Entries of a row are grouped by filter (filled in ascending k).
      Index seg = s0;
      while (seg < s1) {
        const Index k = rows.col[seg] / m2;
        Index end = seg;
        while (end < s1 && rows.col[end] / m2 == k) ++end;
        double* hk = blocks[k].data();
        for (Index s = seg; s < end; ++s) {
          const Index ci = rows.col[s] - k * m2;
          const double vi = rows.val[s];
          for (Index t = seg; t < end; ++t) hk[ci * m2 + (rows.col[t] - k * m2)] += vi * rows.val[t];
        }
        seg = end;
      }
    }
  }

  auto residual_objective = [&] {
    double s = 0.0;
    for (const auto& r : residual) s += 0.5 * r.squaredNorm();
    return s;
  };
  if (report) {
    *report = {};
    report->initial_objective = residual_objective();
  }

  for (int k = 0; k < num_k; ++k)
    if (blocks[k].trace() == 0.0 && report) report->degenerate_filters.push_back(k);

  Vector grad(m2);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int k = 0; k < num_k; ++k) {
      if (blocks[k].trace() == 0.0) continue;
      const Vector old = dict.filter(k);
      grad.setZero();
      for (std::size_t i = 0; i < ops.size(); ++i) ops[i].adjoint_block(k, residual[i], grad.data());
      grad.noalias() += blocks[k] * old;
      const Vector next = minimize_quadratic_on_ball(blocks[k], grad, old);
      const Vector delta = next - old;
      dict.filter(k) = next;
      for (std::size_t i = 0; i < ops.size(); ++i)
        ops[i].apply_block_add(k, delta.data(), -1.0, residual[i]);
    }
    if (report) report->sweep_objectives.push_back(residual_objective());
  }
  return dict;
}

// Online update -------------------------------------------------------------

SurrogateState::SurrogateState(int num_filters, int filter_side)
    : num_filters_(num_filters), side_(filter_side) {
  if (num_filters < 1) throw ConfigError("surrogate needs at least one filter");
  if (filter_side < 1 || filter_side % 2 == 0) throw ConfigError("filter side must be odd");
  const Index km = Index(num_filters) * filter_side * filter_side;
  c_ = Matrix::Zero(km, km);
  b_ = Vector::Zero(km);
}

void SurrogateState::update(std::span<const CodeMap> codes, std::span<const Signal> signals) {
  if (codes.size() != signals.size()) throw ShapeError("code and signal lists differ in length");
  if (codes.empty()) return;
  for (const auto& z : codes)
    if (z.num_filters() != num_filters_) throw ShapeError("code map filter count mismatch");
  const std::int64_t t0 = count_;
  const std::int64_t t1 = count_ + std::int64_t(codes.size());
  if (t0 > 0) {
    const double keep = double(t0) / double(t1);
    c_ *= keep;
    b_ *= keep;
  }
  const double weight = 1.0 / double(t1);
  for (std::size_t i = 0; i < codes.size(); ++i)
    accumulate_gram(codes[i], signals[i], side_, weight, c_, b_);
  count_ = t1;
}

double SurrogateState::objective(const Dictionary& dict) const {
  if (dict.coeffs().size() != b_.size()) throw ShapeError("dictionary size differs from surrogate");
  return 0.5 * dict.coeffs().dot(c_ * dict.coeffs()) - dict.coeffs().dot(b_);
}

Dictionary update_filters_online(const SurrogateState& state, const Dictionary& init, int sweeps,
                                 FilterUpdateReport* report) {
  if (state.count() < 1) throw ConfigError("online filter update needs at least one observation");
  if (sweeps < 1) throw ConfigError("filter sweeps must be >= 1");
  if (init.num_filters() != state.num_filters() || init.side() != state.filter_side())
    throw ShapeError("dictionary shape differs from surrogate");
  const Index m2 = init.filter_size();
  Dictionary dict = init;
  const Matrix& c = state.C();
  const Vector& b = state.B();

  if (report) {
    *report = {};
    report->initial_objective = state.objective(dict);
  }
  std::vector<bool> degenerate(init.num_filters(), false);
  for (int k = 0; k < init.num_filters(); ++k) {
    if (c.block(k * m2, k * m2, m2, m2).trace() == 0.0) {
      degenerate[k] = true;
      if (report) report->degenerate_filters.push_back(k);
    }
  }

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int k = 0; k < init.num_filters(); ++k) {
      if (degenerate[k]) continue;
      const Matrix hk = c.block(k * m2, k * m2, m2, m2);
      const Vector old = dict.filter(k);
      // g_k = B_k - sum_{j != k} C_kj f_j
      Vector g = b.segment(k * m2, m2) - c.middleRows(k * m2, m2) * dict.coeffs() + hk * old;
      dict.filter(k) = minimize_quadratic_on_ball(hk, g, old);
    }
    if (report) report->sweep_objectives.push_back(state.objective(dict));
  }
  return dict;
}

Dictionary random_dictionary(int num_filters, int side, std::uint64_t seed) {
  Dictionary dict(num_filters, side);
  Rng rng = Rng::derive(seed, Stream::dictionary_init, 0);
  for (Index i = 0; i < dict.coeffs().size(); ++i) dict.coeffs()[i] = rng.normal();
  dict.project_to_unit_ball();
  return dict;
}

}  // namespace scsc
