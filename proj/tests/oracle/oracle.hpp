#pragma once

// Brute-force references for tests. Nothing here calls into the operator,
// solver or filter-update code; only the plain data types are shared.

#include <scsc/core.hpp>
#include <scsc/operators.hpp>

#include <span>
#include <utility>

namespace scsc::oracle {

struct Caps {
  Index max_signal = 256;
  int max_filters = 4;
  int max_side = 5;
};

// D in R^{D x DK}: column (k, q) is the response to a unit impulse at q.
Matrix materialize_dict_matrix(const Dictionary& dict, Geometry geometry, const Caps& caps = {});

// Z in R^{D x KM}: column (k, a, b) holds z_k shifted by (a - c, b - c).
Matrix materialize_code_matrix(const CodeMap& codes, int side, const Caps& caps = {});

// M in R^{|mask| x DK}, one 1 per row.
Matrix mask_matrix(const SubsampleMask& mask);

inline Vector flatten(const Signal& s) { return Eigen::Map<const Vector>(s.data(), s.size()); }

double lasso_objective(const Matrix& a, const Vector& x, const Vector& z, double lambda);

// FISTA with capped backtracking and adaptive restart, stopped on a relative
// duality gap <= tol.
// Throws NumericalError after 1e5 iterations.
Vector lasso_reference(const Matrix& a, const Vector& x, double lambda, double tol = 1e-12);

// Projected gradient (step 1/L) on 1/2 f^T C f - f^T B over unit balls of
// `block` consecutive coordinates, stopped when the projected-gradient step
// moves less than tol. Throws NumericalError on non-convergence.
Vector qcqp_reference(const Matrix& c, const Vector& b, Index block, double tol = 1e-8);

double qcqp_objective(const Matrix& c, const Vector& b, const Vector& f);

// (1/t) sum Z_i^T Z_i and (1/t) sum Z_i^T x_i from dense Z_i.
std::pair<Matrix, Vector> direct_surrogate_average(std::span<const CodeMap> codes,
                                                   std::span<const Signal> signals, int side);

}  // namespace scsc::oracle
