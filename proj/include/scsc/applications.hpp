#pragma once

#include <scsc/core.hpp>
#include <scsc/lasso.hpp>

#include <cstdint>

namespace scsc {

// Binary observation grid: 1 where a pixel was observed.
class ObservationMask {
 public:
  ObservationMask() = default;
  explicit ObservationMask(Grid weights);

  // Exactly round(q*D) observed pixels, uniform without replacement.
  static ObservationMask random(Geometry geometry, double rate, std::uint64_t seed);
  static ObservationMask full(Geometry geometry);

  const Grid& weights() const { return weights_; }
  Geometry geometry() const { return geometry_of(weights_); }
  double rate() const;
  bool all_observed() const;

 private:
  Grid weights_;
};

// Sparse codes for a fixed dictionary at p = 1.
CodeMap infer_codes(const Signal& signal, const Dictionary& dict, const AdmmParams& params,
                    double lambda);
CodeMap infer_codes(const Signal& signal, const Dictionary& dict, double lambda,
                    int admm_iterations = 10);

struct InpaintResult {
  Signal reconstruction;
  CodeMap codes;
};

// min 1/2 ||W (x - D z)||^2 + lambda ||z||_1, reconstruction D z. Observed
// pixels are pasted back only when `paste_observed` is set.
InpaintResult inpaint(const Signal& observed, const ObservationMask& omask, const Dictionary& dict,
                      const AdmmParams& params, double lambda, bool paste_observed = false);
InpaintResult inpaint(const Signal& observed, const ObservationMask& omask, const Dictionary& dict,
                      double lambda = 0.4, int admm_iterations = 50, bool paste_observed = false);

}  // namespace scsc
