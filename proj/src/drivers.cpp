#include <scsc/drivers.hpp>
#include <scsc/lasso.hpp>
#include <scsc/rng.hpp>

#include "parallel.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <thread>

namespace scsc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Adds `elapsed` to the running total, keeping the column strictly increasing.
double advance_wall(double total, double elapsed) {
  const double next = total + elapsed;
  return next > total ? next : std::nextafter(total, std::numeric_limits<double>::infinity());
}

void check_geometry(Geometry g, int side, const char* what) {
  if (g.height < side || g.width < side)
    throw ShapeError(std::string(what) + " is smaller than the filter support");
}

// Factor once and reuse across `members` solves, or run CG per solve.
bool prefer_factor_cache(QuadMode mode, Index cols, Index filter_size, std::size_t members,
                         int admm_iterations, Index cap) {
  if (mode == QuadMode::iterative || cols > cap) return false;
  if (mode == QuadMode::factor_cache) return true;
  const double n = double(cols);
  const double solves = double(members) * admm_iterations;
  const double factor_cost = n * n * n / 3.0 + solves * 2.0 * n * n;
  // CG: roughly eight iterations, each two passes of n*M multiply-adds.
  const double cg_cost = solves * 8.0 * 4.0 * n * double(filter_size);
  return factor_cost < cg_cost;
}

// Solves the masked code problem for each member and upsamples.
std::vector<CodeMap> solve_members(std::span<const Signal> members,
                                   const std::vector<CodeMap>* warm_codes, const Dictionary& dict,
                                   const SubsampleMask& mask, const TrainConfig& cfg,
                                   int workers) {
  const Geometry g = geometry_of(members.front());
  AdmmParams params = AdmmParams::from_config(cfg);
  std::optional<FactorCache> cache;
  if (prefer_factor_cache(cfg.quad_mode, mask.size(), dict.filter_size(), members.size(),
                          cfg.admm_iterations, cfg.factor_cap)) {
    const MaskedDictOperator op(dict, g, mask);
    cache = FactorCache::build(op, params.rho, cfg.factor_cap);
  }
  params.mode = QuadMode::iterative;
  std::vector<CodeMap> out(members.size());
  const bool retain = cfg.retain_unsampled && warm_codes;
  detail::parallel_for(members.size(), workers, [&](std::size_t i) {
    std::optional<Vector> warm;
    if (warm_codes) warm = subsample(mask, (*warm_codes)[i]);
    if (!retain) {
      const AdmmResult r = solve_codes(members[i], dict, mask, cfg.lambda, params,
                                       warm ? &*warm : nullptr, cache ? &*cache : nullptr);
      out[i] = upsample(mask, r.codes, dict.num_filters(), g);
      return;
    }
    CodeMap fixed = (*warm_codes)[i];
    for (Index j : mask.indices) fixed.coeffs()[j] = 0.0;
    const Signal residual = members[i] - DictOperator(dict, g).apply(fixed);
    const AdmmResult r = solve_codes(residual, dict, mask, cfg.lambda, params, &*warm,
                                     cache ? &*cache : nullptr);
    for (std::size_t k = 0; k < mask.indices.size(); ++k)
      fixed.coeffs()[mask.indices[k]] = r.codes[Index(k)];
    out[i] = std::move(fixed);
  });
  return out;
}

double mean_nonzero_fraction(const std::vector<CodeMap>& codes) {
  double s = 0.0;
  for (const auto& z : codes) s += nonzero_fraction(z, 0.1);
  return codes.empty() ? 0.0 : s / double(codes.size());
}

}  // namespace

int resolve_workers(int workers) {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

bool is_eval_step(EvalSchedule schedule, int step, int total) {
  switch (schedule) {
    case EvalSchedule::every:
      return true;
    case EvalSchedule::last:
      return step == total;
    case EvalSchedule::none:
      return false;
    case EvalSchedule::pow2:
      return step == total || (step > 0 && (step & (step - 1)) == 0);
  }
  return false;
}

// StreamSource ----------------------------------------------------------------

StreamSource::StreamSource(std::vector<Signal> signals, DrawPolicy policy, std::uint64_t seed)
    : signals_(std::move(signals)), policy_(policy), seed_(seed) {
  if (!signals_.empty()) {
    geometry_ = geometry_of(signals_.front());
    for (const auto& s : signals_)
      if (geometry_of(s) != geometry_) throw ShapeError("stream signals differ in geometry");
  }
}

StreamSource::StreamSource(Generator generator, Geometry geometry)
    : generator_(std::move(generator)), geometry_(geometry) {}

Signal StreamSource::draw(std::uint64_t n) const {
  if (generator_) {
    Signal s = generator_(n);
    if (geometry_of(s) != geometry_) throw ShapeError("generated signal has unexpected geometry");
    return s;
  }
  if (signals_.empty()) throw ShapeError("empty stream");
  if (policy_ == DrawPolicy::sequential) return signals_[n % signals_.size()];
  Rng rng = Rng::derive(seed_, Stream::draw, n);
  return signals_[rng.below(signals_.size())];
}

// Evaluation ------------------------------------------------------------------

TestMetrics evaluate_dictionary(std::span<const Signal> images, const Dictionary& dict,
                                const TrainConfig& cfg) {
  TestMetrics m;
  if (images.empty()) return m;
  const AdmmParams params = AdmmParams::for_lambda(cfg.lambda);
  std::vector<double> obj(images.size()), db(images.size()), nnz(images.size());
  detail::parallel_for(images.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
    const Geometry g = geometry_of(images[i]);
    const SubsampleMask mask = full_mask(g.size(), dict.num_filters());
    const AdmmResult r = solve_codes(images[i], dict, mask, cfg.lambda, params);
    const CodeMap z = upsample(mask, r.codes, dict.num_filters(), g);
    const Signal recon = DictOperator(dict, g).apply(z);
    obj[i] = 0.5 * (images[i] - recon).squaredNorm() + cfg.lambda * z.coeffs().lpNorm<1>();
    db[i] = psnr_rescaled(images[i], recon);
    nnz[i] = nonzero_fraction(z, 0.1);
  });
  for (std::size_t i = 0; i < images.size(); ++i) {
    m.objective += obj[i];
    m.mean_psnr_db += db[i];
    m.nonzero_fraction += nnz[i];
  }
  m.mean_psnr_db /= double(images.size());
  m.nonzero_fraction /= double(images.size());
  return m;
}

// SBCSC -------------------------------------------------------------------------

SbcscResult train_sbcsc(std::span<const Signal> signals, const TrainConfig& cfg,
                        const Dictionary* init, const DictionaryObserver& observer) {
  cfg.validate();
  if (signals.empty()) throw ConfigError("batch training needs at least one signal");
  const Geometry g = geometry_of(signals.front());
  for (const auto& s : signals) {
    if (geometry_of(s) != g) throw ShapeError("training signals differ in geometry");
    require_finite(s, "training signal");
  }
  check_geometry(g, cfg.filter_side, "training signal");
  if (init && (init->num_filters() != cfg.num_filters || init->side() != cfg.filter_side))
    throw ShapeError("initial dictionary shape differs from the configuration");

  const int workers = resolve_workers(cfg.workers);
  SbcscResult result;
  result.dictionary = init ? *init : random_dictionary(cfg.num_filters, cfg.filter_side, cfg.seed);
  result.codes.assign(signals.size(), CodeMap(cfg.num_filters, g));

  double wall = 0.0;
  std::optional<double> previous;
  for (int t = 1; t <= cfg.max_outer; ++t) {
    const auto t0 = Clock::now();
    const SubsampleMask mask =
        sample_mask(g.size(), cfg.num_filters, cfg.subsample_rate, cfg.seed, std::uint64_t(t));
    result.codes = solve_members(signals, &result.codes, result.dictionary, mask, cfg, workers);
    const double code_s = seconds_since(t0);

    const auto t1 = Clock::now();
    result.dictionary =
        update_filters_batch(result.codes, signals, result.dictionary, cfg.filter_sweeps);
    const double filter_s = seconds_since(t1);

    const double obj = objective(signals, result.dictionary, result.codes, cfg.lambda);
    wall = advance_wall(wall, seconds_since(t0));
    result.code_update_seconds.push_back(code_s);
    result.filter_update_seconds.push_back(filter_s);

    TraceRow row;
    row.iteration = t;
    row.wall_seconds = wall;
    row.objective = obj;
    row.nonzero_fraction = mean_nonzero_fraction(result.codes);
    result.trace.rows.push_back(row);
    if (observer) observer(t, result.dictionary);

    if (previous) {
      const double change = std::abs(*previous - obj) / std::max(std::abs(*previous), 1e-300);
      if (change < cfg.tol) {
        result.converged = true;
        break;
      }
    }
    previous = obj;
  }
  return result;
}

// SOCSC -------------------------------------------------------------------------

SocscResult train_socsc(const StreamSource& stream, const TrainConfig& cfg,
                        std::span<const Signal> test_set, const Dictionary* init,
                        const DictionaryObserver& observer) {
  cfg.validate();
  if (stream.empty()) throw ConfigError("online training needs a non-empty stream");
  const Geometry g = stream.geometry();
  check_geometry(g, cfg.filter_side, "stream signal");
  for (const auto& s : test_set) {
    check_geometry(geometry_of(s), cfg.filter_side, "test signal");
    require_finite(s, "test signal");
  }
  if (init && (init->num_filters() != cfg.num_filters || init->side() != cfg.filter_side))
    throw ShapeError("initial dictionary shape differs from the configuration");

  const int workers = resolve_workers(cfg.workers);
  SocscResult result;
  result.dictionary = init ? *init : random_dictionary(cfg.num_filters, cfg.filter_side, cfg.seed);
  result.surrogate = SurrogateState(cfg.num_filters, cfg.filter_side);

  double wall = 0.0;
  std::uint64_t drawn = 0;
  for (int step = 1; step <= cfg.max_outer; ++step) {
    const auto t0 = Clock::now();
    std::vector<Signal> batch;
    batch.reserve(cfg.minibatch);
    for (int j = 0; j < cfg.minibatch; ++j) {
      batch.push_back(stream.draw(drawn++));
      require_finite(batch.back(), "stream signal");
    }
    const SubsampleMask mask =
        sample_mask(g.size(), cfg.num_filters, cfg.subsample_rate, cfg.seed, std::uint64_t(step));
    const std::vector<CodeMap> codes =
        solve_members(batch, nullptr, result.dictionary, mask, cfg, workers);
    const double batch_objective = objective(batch, result.dictionary, codes, cfg.lambda);

    result.surrogate.update(codes, batch);
    result.dictionary = update_filters_online(result.surrogate, result.dictionary, cfg.filter_sweeps);
    wall = advance_wall(wall, seconds_since(t0));

    TraceRow row;
    row.iteration = step;
    row.wall_seconds = wall;
    row.objective = batch_objective;
    row.nonzero_fraction = mean_nonzero_fraction(codes);
    if (!test_set.empty() && is_eval_step(cfg.eval_schedule, step, cfg.max_outer)) {
      const TestMetrics m = evaluate_dictionary(test_set, result.dictionary, cfg);
      row.test_objective = m.objective;
      row.test_psnr_db = m.mean_psnr_db;
    }
    result.trace.rows.push_back(row);
    if (observer) observer(step, result.dictionary);
  }
  return result;
}

}  // namespace scsc
