#pragma once

#include <scsc/core.hpp>
#include <scsc/filter_update.hpp>
#include <scsc/operators.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace scsc {

// Called after every filter update with the iteration index (1-based) and
// the freshly updated dictionary.
using DictionaryObserver = std::function<void(int iteration, const Dictionary&)>;

// Ordered supplier of training signals for the online driver.
class StreamSource {
 public:
  using Generator = std::function<Signal(std::uint64_t index)>;

  StreamSource(std::vector<Signal> signals, DrawPolicy policy = DrawPolicy::sequential,
               std::uint64_t seed = 0);
  StreamSource(Generator generator, Geometry geometry);

  // The n-th draw (0-based). Deterministic in (policy, seed, n).
  Signal draw(std::uint64_t n) const;

  Geometry geometry() const { return geometry_; }
  bool empty() const { return !generator_ && signals_.empty(); }
  std::size_t pool_size() const { return signals_.size(); }

 private:
  std::vector<Signal> signals_;
  DrawPolicy policy_ = DrawPolicy::sequential;
  std::uint64_t seed_ = 0;
  Generator generator_;
  Geometry geometry_;
};

struct SbcscResult {
  Dictionary dictionary;
  std::vector<CodeMap> codes;
  TrainTrace trace;
  bool converged = false;
  // Total time spent in code updates and filter updates, seconds.
  std::vector<double> code_update_seconds;
  std::vector<double> filter_update_seconds;
};

// Stochastic batch CSC. `init` defaults to random_dictionary(K, m, seed).
SbcscResult train_sbcsc(std::span<const Signal> signals, const TrainConfig& cfg,
                        const Dictionary* init = nullptr,
                        const DictionaryObserver& observer = {});

struct SocscResult {
  Dictionary dictionary;
  SurrogateState surrogate;
  TrainTrace trace;
};

// Stochastic online CSC with mini-batches of cfg.minibatch signals per step,
// cfg.max_outer steps. Test metrics follow cfg.eval_schedule when a test set
// is given; evaluation time is excluded from the trace's wall clock.
SocscResult train_socsc(const StreamSource& stream, const TrainConfig& cfg,
                        std::span<const Signal> test_set = {}, const Dictionary* init = nullptr,
                        const DictionaryObserver& observer = {});

struct TestMetrics {
  double objective = 0.0;
  double mean_psnr_db = 0.0;
  double nonzero_fraction = 0.0;
};

// Codes at p = 1 with the default ADMM budget for cfg.lambda, then the summed
// objective, the mean rescaled PSNR and the mean nonzero fraction.
TestMetrics evaluate_dictionary(std::span<const Signal> images, const Dictionary& dict,
                                const TrainConfig& cfg);

// Whether online step `step` (1-based) of `total` is an evaluation point.
bool is_eval_step(EvalSchedule schedule, int step, int total);

// Resolves workers == 0 to the machine's parallelism.
int resolve_workers(int workers);

}  // namespace scsc
