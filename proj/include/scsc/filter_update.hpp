#pragma once

#include <scsc/core.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace scsc {

struct FilterUpdateReport {
  // Filters whose block had zero curvature (all their codes were zero).
  std::vector<int> degenerate_filters;
  // Objective after each sweep, in the problem's own form (batch: 1/2 sum of
  // squared residuals; online: 1/2 f^T C f - f^T B).
  std::vector<double> sweep_objectives;
  double initial_objective = 0.0;
};

// Exact minimizer of 1/2 f^T H f - g^T f over the unit ball ||f|| <= 1.
// `previous` fills directions of zero curvature when the optimum is not
// unique. H must be symmetric positive semidefinite.
Vector minimize_quadratic_on_ball(const Matrix& hessian, const Vector& linear,
                                  const Vector& previous);

// Projected block coordinate descent on
//   min_f 1/2 sum_i ||x_i - Z_i f||^2  s.t. ||d_k|| <= 1,
// one block per filter, ascending k, warm-started from `init`.
Dictionary update_filters_batch(std::span<const CodeMap> codes, std::span<const Signal> signals,
                                const Dictionary& init, int sweeps = 1,
                                FilterUpdateReport* report = nullptr);

// Running averages C = (1/t) sum Z_i^T Z_i and B = (1/t) sum Z_i^T x_i.
class SurrogateState {
 public:
  SurrogateState() = default;
  SurrogateState(int num_filters, int filter_side);

  int num_filters() const { return num_filters_; }
  int filter_side() const { return side_; }
  std::int64_t count() const { return count_; }
  const Matrix& C() const { return c_; }
  const Vector& B() const { return b_; }

  // Applies the per-signal recurrence
  //   C^t = ((t-1)/t) C^{t-1} + (1/t) Z_t^T Z_t,  B^t likewise with Z_t^T x_t
  // once per member, members in order. The recurrences over a batch telescope
  // to a single rescale by t0/(t0+n) plus the members' Gram terms weighted by
  // 1/(t0+n); that closed form is what is evaluated.
  void update(std::span<const CodeMap> codes, std::span<const Signal> signals);

  // 1/2 f^T C f - f^T B.
  double objective(const Dictionary& dict) const;

 private:
  int num_filters_ = 0;
  int side_ = 0;
  std::int64_t count_ = 0;
  Matrix c_;
  Vector b_;
};

inline SurrogateState& update_surrogates(SurrogateState& state, std::span<const CodeMap> codes,
                                         std::span<const Signal> signals) {
  state.update(codes, signals);
  return state;
}

// Adds weight * (Z^T Z, Z^T x) for one code map into (gram, corr). Z^T Z is
// accumulated pixel by pixel from the sparse rows of Z.
void accumulate_gram(const CodeMap& codes, const Signal& signal, int filter_side, double weight,
                     Matrix& gram, Vector& corr);

// Projected block coordinate descent on min 1/2 f^T C f - f^T B over the
// product of unit balls, warm-started from `init`.
Dictionary update_filters_online(const SurrogateState& state, const Dictionary& init,
                                 int sweeps = 1, FilterUpdateReport* report = nullptr);

// i.i.d. standard normal entries, each filter projected onto the unit ball.
Dictionary random_dictionary(int num_filters, int side, std::uint64_t seed);

}  // namespace scsc
