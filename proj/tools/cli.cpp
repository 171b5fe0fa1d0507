#include "cli.hpp"

#include <scsc/scsc.hpp>
#include <scsc/io.hpp>

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace scsc::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using SystemClock = std::chrono::system_clock;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string env_name(const std::string& flag) {
  std::string out = "SCSC_";
  for (char c : flag.substr(2)) out += c == '-' ? '_' : char(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string absolute_path(const std::string& p) {
  return p.empty() ? p : fs::absolute(p).lexically_normal().string();
}

// Options bound to variables, remembered so a run can be written to and
// replayed from a manifest.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& flag, T& var, const std::string& desc) {
    entries_.push_back({flag, [&var] { return json(var); }});
    CLI::Option* opt =
        app_->add_option(flag, var, desc)->envname(env_name(flag))->capture_default_str();
    if constexpr (!CLI::detail::is_mutable_container<T>::value)
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    return opt;
  }

  CLI::Option* path(const std::string& flag, std::string& var, const std::string& desc) {
    entries_.push_back({flag, [&var] { return json(absolute_path(var)); }});
    return app_->add_option(flag, var, desc)
        ->envname(env_name(flag))
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  CLI::Option* flag(const std::string& flag, bool& var, const std::string& desc) {
    entries_.push_back({flag, [&var] { return json(var); }});
    return app_->add_flag(flag, var, desc)->envname(env_name(flag));
  }

  json resolved() const {
    json out = json::object();
    for (const auto& e : entries_) out[e.flag.substr(2)] = e.get();
    return out;
  }

 private:
  struct Entry {
    std::string flag;
    std::function<json()> get;
  };
  CLI::App* app_;
  std::vector<Entry> entries_;
};

// Outputs are staged under hidden names and renamed into place only when the
// whole command succeeds; anything staged or renamed by a failed run is removed.
class Outputs {
 public:
  explicit Outputs(const fs::path& dir) : dir_(dir) {
    std::error_code ec;
    if (!fs::exists(dir_)) {
      if (!fs::create_directories(dir_, ec) || ec)
        throw IoError("cannot create output directory " + dir_.string());
      created_dir_ = true;
    } else if (!fs::is_directory(dir_)) {
      throw IoError("output path is not a directory: " + dir_.string());
    }
  }
  Outputs(const Outputs&) = delete;
  Outputs& operator=(const Outputs&) = delete;

  ~Outputs() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& name : names_) fs::remove(staged(name), ec);
    for (const auto& name : renamed_) fs::remove(dir_ / name, ec);
    if (created_dir_) fs::remove(dir_, ec);  // only succeeds when empty
  }

  fs::path stage(const std::string& name) {
    names_.push_back(name);
    return staged(name);
  }

  void commit() {
    for (const auto& name : names_)
      if (fs::is_directory(dir_ / name))
        throw IoError("output name is taken by a directory: " + (dir_ / name).string());
    for (const auto& name : names_) {
      std::error_code ec;
      fs::rename(staged(name), dir_ / name, ec);
      if (ec) throw IoError("cannot move output into place: " + (dir_ / name).string());
      renamed_.push_back(name);
    }
    committed_ = true;
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path staged(const std::string& name) const { return dir_ / (".partial-" + name); }

  fs::path dir_;
  bool created_dir_ = false;
  bool committed_ = false;
  std::vector<std::string> names_;
  std::vector<std::string> renamed_;
};

std::string utc_now() {
  const std::time_t t = SystemClock::to_time_t(SystemClock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string hex32(std::uint32_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(8) << std::setfill('0') << v;
  return s.str();
}

class Manifest {
 public:
  Manifest(std::string command, const Options& options)
      : command_(std::move(command)), options_(options.resolved()), started_(utc_now()),
        t0_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& p) {
    const std::string abs = absolute_path(p.string());
    for (const auto& e : inputs_)
      if (e["path"] == abs) return;
    inputs_.push_back({{"path", abs},
                       {"bytes", std::uint64_t(fs::file_size(p))},
                       {"crc32", hex32(file_crc32(p))}});
  }
  void output(const std::string& role, const std::string& name) { outputs_[role] = name; }
  void check(const std::string& file, const std::string& column) {
    check_ = {{"file", file}, {"column", column}};
  }
  void config(json c) { config_ = std::move(c); }

  std::string text() const {
    json m;
    m["format"] = "scsc-run-manifest";
    m["format_version"] = 1;
    m["toolkit_version"] = SCSC_VERSION;
    m["command"] = command_;
    m["options"] = options_;
    if (!config_.is_null()) m["config"] = config_;
    if (options_.contains("seed")) m["seed"] = options_["seed"];
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    if (!check_.is_null()) m["check"] = check_;
    m["started_utc"] = started_;
    m["finished_utc"] = utc_now();
    m["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    return m.dump(2) + "\n";
  }

  void write(Outputs& outs) {
    output("manifest", "manifest.json");
    write_text(outs.stage("manifest.json"), text());
  }

 private:
  std::string command_;
  json options_;
  json config_;
  json inputs_ = json::array();
  json outputs_ = json::object();
  json check_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

QuadMode parse_quad(const std::string& s) {
  if (s == "iterative") return QuadMode::iterative;
  if (s == "factor") return QuadMode::factor_cache;
  return QuadMode::automatic;
}

const char* quad_name(QuadMode m) {
  switch (m) {
    case QuadMode::iterative: return "iterative";
    case QuadMode::factor_cache: return "factor";
    default: return "auto";
  }
}

EvalSchedule parse_schedule(const std::string& s) {
  if (s == "every") return EvalSchedule::every;
  if (s == "last") return EvalSchedule::last;
  if (s == "none") return EvalSchedule::none;
  return EvalSchedule::pow2;
}

struct ImageSet {
  std::vector<fs::path> paths;
  std::vector<Signal> signals;
};

ImageSet load_images(const std::string& where, bool normalize, Manifest& manifest) {
  if (where.empty()) throw UsageError("an input path is required");
  ImageSet set;
  set.paths = list_images(where);
  for (const auto& p : set.paths) {
    Signal s = read_image(p);
    set.signals.push_back(normalize ? contrast_normalize(s) : std::move(s));
    manifest.input(p);
  }
  return set;
}

Signal upscale(const Signal& s, int factor) {
  Signal out(s.rows() * factor, s.cols() * factor);
  for (Index y = 0; y < out.rows(); ++y)
    for (Index x = 0; x < out.cols(); ++x) out(y, x) = s(y / factor, x / factor);
  return out;
}

// Flags shared by the training commands.
struct TrainArgs {
  std::string input, out, init;
  int filters = 100;
  int filter_size = 11;
  double lambda = 1.0;
  double subsample = 1.0;
  int admm_iters = 10;
  double rho = 0.0;
  double alpha = 1.8;
  int max_iters = 20;
  double tol = 1e-3;
  std::uint64_t seed = 0;
  std::string quad_mode = "iterative";
  double cg_tol = 1e-4;
  int cg_max_iters = 100;
  long long factor_cap = 6000;
  int filter_sweeps = 1;
  bool retain_unsampled = false;
  int workers = 0;
  bool no_normalize = false;
  int mosaic_scale = 4;
  // online only
  int minibatch = 1;
  std::string test_dir;
  std::string eval_schedule = "pow2";
  std::string draw = "sequential";

  TrainConfig config() const {
    TrainConfig c;
    c.num_filters = filters;
    c.filter_side = filter_size;
    c.lambda = lambda;
    c.subsample_rate = subsample;
    c.admm_iterations = admm_iters;
    c.rho = rho;
    c.alpha = alpha;
    c.minibatch = minibatch;
    c.max_outer = max_iters;
    c.tol = tol;
    c.seed = seed;
    c.quad_mode = parse_quad(quad_mode);
    c.cg_tol = cg_tol;
    c.cg_max_iterations = cg_max_iters;
    c.factor_cap = Index(factor_cap);
    c.filter_sweeps = filter_sweeps;
    c.retain_unsampled = retain_unsampled;
    c.eval_schedule = parse_schedule(eval_schedule);
    c.draw_policy = draw == "random" ? DrawPolicy::uniform_random : DrawPolicy::sequential;
    c.workers = workers;
    c.validate();
    return c;
  }
};

json config_json(const TrainConfig& c) {
  return {{"num_filters", c.num_filters},
          {"filter_side", c.filter_side},
          {"lambda", c.lambda},
          {"subsample_rate", c.subsample_rate},
          {"admm_iterations", c.admm_iterations},
          {"rho", c.effective_rho()},
          {"alpha", c.alpha},
          {"minibatch", c.minibatch},
          {"max_outer", c.max_outer},
          {"tol", c.tol},
          {"seed", c.seed},
          {"quad_mode", quad_name(c.quad_mode)},
          {"cg_tol", c.cg_tol},
          {"cg_max_iterations", c.cg_max_iterations},
          {"factor_cap", c.factor_cap},
          {"filter_sweeps", c.filter_sweeps},
          {"retain_unsampled", c.retain_unsampled},
          {"workers", resolve_workers(c.workers)}};
}

void add_solver_flags(Options& o, TrainArgs& a) {
  o.add("--lambda", a.lambda, "Sparsity weight")->check(CLI::PositiveNumber);
  o.add("--admm-iters", a.admm_iters, "ADMM iterations per code update");
  o.add("--rho", a.rho, "ADMM penalty (0 means 10 * lambda)");
  o.add("--alpha", a.alpha, "ADMM over-relaxation");
  o.add("--quad-mode", a.quad_mode, "Quadratic substep solver")
      ->check(CLI::IsMember({"iterative", "factor", "auto"}));
  o.add("--cg-tol", a.cg_tol, "Relative tolerance of the CG quadratic substep");
  o.add("--cg-max-iters", a.cg_max_iters, "CG iteration cap");
  o.add("--factor-cap", a.factor_cap, "Largest system factorized directly");
  o.add("--workers", a.workers, "Worker threads (0 means all cores)");
}

void add_train_flags(Options& o, TrainArgs& a) {
  o.path("--input", a.input, "Training image file or directory")->required();
  o.path("--out", a.out, "Output directory")->required();
  o.path("--init", a.init, "Initial dictionary (.cscd)");
  o.add("--filters", a.filters, "Number of filters K");
  o.add("--filter-size", a.filter_size, "Filter side m (odd)");
  o.add("--subsample", a.subsample, "Code subsampling rate p in (0, 1]");
  o.add("--max-iters", a.max_iters, "Outer iterations");
  o.add("--seed", a.seed, "Random seed");
  o.add("--filter-sweeps", a.filter_sweeps, "Block-coordinate sweeps per filter update");
  o.flag("--no-normalize", a.no_normalize, "Skip contrast normalization of inputs");
  o.add("--mosaic-scale", a.mosaic_scale, "Pixel magnification of filters.png")
      ->check(CLI::Range(1, 64));
  add_solver_flags(o, a);
}

std::optional<Dictionary> load_init(const std::string& path, Manifest& manifest) {
  if (path.empty()) return std::nullopt;
  manifest.input(path);
  return read_dictionary(path);
}

void write_training_outputs(Outputs& outs, Manifest& manifest, const Dictionary& dict,
                            const TrainTrace& trace, int mosaic_scale) {
  write_dictionary(outs.stage("dict.cscd"), dict);
  manifest.output("dictionary", "dict.cscd");
  write_trace(outs.stage("trace.csv"), trace);
  manifest.output("trace", "trace.csv");
  write_image(outs.stage("filters.png"), upscale(filter_mosaic(dict), mosaic_scale));
  manifest.output("mosaic", "filters.png");
  manifest.check("trace.csv", "objective");
  manifest.write(outs);
  outs.commit();
}

void report_trace(std::ostream& out, const TrainTrace& trace, const fs::path& dir) {
  const TraceRow& last = trace.rows.back();
  out << "iterations " << last.iteration << "  objective " << format_double(last.objective)
      << "  nnz " << format_double(last.nonzero_fraction) << "  wall_s "
      << format_double(last.wall_seconds);
  if (last.test_psnr_db) out << "  test_psnr_db " << format_double(*last.test_psnr_db);
  out << "\nwrote " << dir.string() << "\n";
}

int train_batch(const TrainArgs& a, const Options& o, std::ostream& out) {
  const TrainConfig cfg = a.config();
  Manifest manifest("train-batch", o);
  manifest.config(config_json(cfg));
  const ImageSet train = load_images(a.input, !a.no_normalize, manifest);
  const auto init = load_init(a.init, manifest);
  Outputs outs(a.out);
  const SbcscResult r = train_sbcsc(train.signals, cfg, init ? &*init : nullptr);
  write_training_outputs(outs, manifest, r.dictionary, r.trace, a.mosaic_scale);
  report_trace(out, r.trace, outs.dir());
  return ok;
}

int train_online(const TrainArgs& a, const Options& o, std::ostream& out) {
  const TrainConfig cfg = a.config();
  Manifest manifest("train-online", o);
  manifest.config(config_json(cfg));
  ImageSet train = load_images(a.input, !a.no_normalize, manifest);
  ImageSet test;
  if (!a.test_dir.empty()) test = load_images(a.test_dir, !a.no_normalize, manifest);
  const auto init = load_init(a.init, manifest);
  Outputs outs(a.out);
  const StreamSource stream(std::move(train.signals), cfg.draw_policy, cfg.seed);
  const SocscResult r = train_socsc(stream, cfg, test.signals, init ? &*init : nullptr);
  write_training_outputs(outs, manifest, r.dictionary, r.trace, a.mosaic_scale);
  report_trace(out, r.trace, outs.dir());
  return ok;
}

struct ApplyArgs {
  TrainArgs solver;
  std::string input, dict, out;
  double observe = 0.5;
  int trials = 5;
  std::uint64_t seed = 0;
  bool paste = false;
  bool no_normalize = false;
};

AdmmParams admm_params(const TrainArgs& a) {
  AdmmParams p = AdmmParams::for_lambda(a.lambda);
  p.iterations = a.admm_iters;
  if (a.rho > 0.0) p.rho = a.rho;
  p.alpha = a.alpha;
  p.mode = parse_quad(a.quad_mode);
  p.cg_tol = a.cg_tol;
  p.cg_max_iterations = a.cg_max_iters;
  p.factor_cap = Index(a.factor_cap);
  p.validate();
  return p;
}

int inpaint_cmd(const ApplyArgs& a, const Options& o, std::ostream& out) {
  if (!(a.observe > 0.0 && a.observe <= 1.0)) throw UsageError("--observe must be in (0, 1]");
  if (a.trials < 1) throw UsageError("--trials must be at least 1");
  const AdmmParams params = admm_params(a.solver);
  Manifest manifest("inpaint", o);
  const ImageSet images = load_images(a.input, !a.no_normalize, manifest);
  manifest.input(a.dict);
  const Dictionary dict = read_dictionary(a.dict);
  Outputs outs(a.out);

  std::string csv = "image,trial,psnr_db,zero_fill_psnr_db\n";
  double sum = 0.0, sum_zero = 0.0;
  for (std::size_t i = 0; i < images.signals.size(); ++i) {
    const Signal& x = images.signals[i];
    const std::string stem = images.paths[i].stem().string();
    for (int t = 0; t < a.trials; ++t) {
      const std::uint64_t mseed = Rng::derive(a.seed, Stream::observation, std::uint64_t(t))();
      const auto om = ObservationMask::random(geometry_of(x), a.observe, mseed);
      const Signal observed = x.array() * om.weights().array();
      const InpaintResult r = inpaint(observed, om, dict, params, a.solver.lambda, a.paste);
      const double p = psnr_rescaled(x, r.reconstruction);
      const double pz = psnr_rescaled(x, observed);
      sum += p;
      sum_zero += pz;
      csv += csv_field(images.paths[i].filename().string()) + "," + std::to_string(t) + "," +
             format_double(p) + "," + format_double(pz) + "\n";
      if (t == 0) {
        write_image(outs.stage(stem + "_observed.png"), rescale_for_display(observed));
        write_image(outs.stage(stem + "_inpainted.png"), rescale_for_display(r.reconstruction));
      }
    }
  }
  write_text(outs.stage("inpaint.csv"), csv);
  manifest.output("results", "inpaint.csv");
  manifest.check("inpaint.csv", "psnr_db");
  manifest.write(outs);
  outs.commit();
  const double n = double(images.signals.size() * std::size_t(a.trials));
  out << "mean psnr_db " << format_double(sum / n) << "  zero-fill psnr_db "
      << format_double(sum_zero / n) << "\nwrote " << outs.dir().string() << "\n";
  return ok;
}

int reconstruct_cmd(const ApplyArgs& a, const Options& o, std::ostream& out) {
  const AdmmParams params = admm_params(a.solver);
  Manifest manifest("reconstruct", o);
  const ImageSet images = load_images(a.input, !a.no_normalize, manifest);
  manifest.input(a.dict);
  const Dictionary dict = read_dictionary(a.dict);
  Outputs outs(a.out);

  std::string csv = "image,objective,psnr_db,nnz_frac\n";
  double sum = 0.0;
  for (std::size_t i = 0; i < images.signals.size(); ++i) {
    const Signal& x = images.signals[i];
    const CodeMap z = infer_codes(x, dict, params, a.solver.lambda);
    const Signal rec = DictOperator(dict, geometry_of(x)).apply(z);
    const double p = psnr_rescaled(x, rec);
    sum += p;
    csv += csv_field(images.paths[i].filename().string()) + "," +
           format_double(objective(x, dict, z, a.solver.lambda)) + "," + format_double(p) + "," +
           format_double(nonzero_fraction(z)) + "\n";
    write_image(outs.stage(images.paths[i].stem().string() + "_recon.png"),
                rescale_for_display(rec));
  }
  write_text(outs.stage("reconstruct.csv"), csv);
  manifest.output("results", "reconstruct.csv");
  manifest.check("reconstruct.csv", "objective");
  manifest.write(outs);
  outs.commit();
  out << "mean psnr_db " << format_double(sum / double(images.signals.size())) << "\nwrote "
      << outs.dir().string() << "\n";
  return ok;
}

int bench_cmd(const TrainArgs& a, const std::vector<double>& rates, const Options& o,
              std::ostream& out) {
  TrainConfig cfg = a.config();
  cfg.tol = 0.0;
  for (double p : rates)
    if (!(p > 0.0 && p <= 1.0)) throw UsageError("--rates entries must be in (0, 1]");
  Manifest manifest("bench", o);
  manifest.config(config_json(cfg));
  const ImageSet train = load_images(a.input, !a.no_normalize, manifest);
  const auto init = load_init(a.init, manifest);
  Outputs outs(a.out);

  std::string csv = "p,iter,code_update_s,filter_update_s,objective\n";
  for (double p : rates) {
    cfg.subsample_rate = p;
    const SbcscResult r = train_sbcsc(train.signals, cfg, init ? &*init : nullptr);
    double code_total = 0.0;
    for (std::size_t i = 0; i < r.trace.rows.size(); ++i) {
      code_total += r.code_update_seconds[i];
      csv += format_double(p) + "," + std::to_string(r.trace.rows[i].iteration) + "," +
             format_double(r.code_update_seconds[i]) + "," +
             format_double(r.filter_update_seconds[i]) + "," +
             format_double(r.trace.rows[i].objective) + "\n";
    }
    out << "p " << format_double(p) << "  mean code_update_s "
        << format_double(code_total / double(r.trace.rows.size())) << "  final objective "
        << format_double(r.trace.rows.back().objective) << "\n";
  }
  write_text(outs.stage("bench.csv"), csv);
  manifest.output("bench", "bench.csv");
  manifest.check("bench.csv", "objective");
  manifest.write(outs);
  outs.commit();
  out << "wrote " << outs.dir().string() << "\n";
  return ok;
}

struct SynthArgs {
  std::string out;
  int count = 8;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 0;
};

int synth_cmd(const SynthArgs& a, const Options& o, std::ostream& out) {
  if (a.count < 1 || a.height < 1 || a.width < 1)
    throw UsageError("--count, --height and --width must be positive");
  Manifest manifest("synth", o);
  Outputs outs(a.out);
  for (int i = 0; i < a.count; ++i) {
    std::ostringstream name;
    name << "scene_" << std::setw(3) << std::setfill('0') << i << ".png";
    write_image(outs.stage(name.str()),
                synthetic_scene({a.height, a.width}, a.seed, std::uint64_t(i)));
  }
  manifest.write(outs);
  outs.commit();
  out << "wrote " << a.count << " images to " << outs.dir().string() << "\n";
  return ok;
}

// Replay ---------------------------------------------------------------------

std::vector<std::string> column(const fs::path& csv, const std::string& name) {
  const auto records = parse_csv(read_text(csv));
  if (records.empty()) throw IoError("empty CSV " + csv.string());
  const auto& header = records.front();
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw IoError("CSV " + csv.string() + " has no column " + name);
  const std::size_t c = std::size_t(it - header.begin());
  std::vector<std::string> out;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() <= c) throw IoError("short CSV row in " + csv.string());
    out.push_back(records[r][c]);
  }
  return out;
}

std::vector<std::string> replay_args(const json& manifest, const fs::path& out_dir) {
  std::vector<std::string> args{manifest.at("command").get<std::string>()};
  for (const auto& [key, value] : manifest.at("options").items()) {
    const std::string flag = "--" + key;
    if (key == "out") {
      args.push_back(flag + "=" + out_dir.string());
    } else if (value.is_boolean()) {
      args.push_back(flag + "=" + (value.get<bool>() ? "true" : "false"));
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + format_double(v.get<double>());
      args.push_back(flag + "=" + joined);
    } else if (value.is_number_float()) {
      args.push_back(flag + "=" + format_double(value.get<double>()));
    } else if (value.is_number_unsigned()) {
      args.push_back(flag + "=" + std::to_string(value.get<std::uint64_t>()));
    } else if (value.is_number_integer()) {
      args.push_back(flag + "=" + std::to_string(value.get<std::int64_t>()));
    } else if (value.get<std::string>().empty()) {
      args.push_back(flag);
      args.push_back("");
    } else {
      args.push_back(flag + "=" + value.get<std::string>());
    }
  }
  return args;
}

int replay_cmd(const std::string& manifest_path, std::string out_dir, std::ostream& out,
               std::ostream& err) {
  json m;
  try {
    m = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw IoError("cannot parse manifest " + manifest_path + ": " + e.what());
  }
  if (m.value("format", "") != "scsc-run-manifest" || m.value("format_version", 0) != 1)
    throw IoError("not a version 1 run manifest: " + manifest_path);
  const fs::path source_dir = fs::absolute(manifest_path).parent_path().lexically_normal();
  if (out_dir.empty()) out_dir = (source_dir / "replay").string();
  const fs::path target = fs::absolute(out_dir).lexically_normal();
  if (fs::exists(target) && fs::equivalent(target, source_dir))
    throw UsageError("replay output directory must differ from the recorded run");

  try {
    for (const auto& in : m.at("inputs")) {
      const fs::path p = in.at("path").get<std::string>();
      if (!fs::exists(p)) throw IoError("recorded input is missing: " + p.string());
      if (hex32(file_crc32(p)) != in.at("crc32").get<std::string>())
        throw IoError("recorded input changed since the run: " + p.string());
    }
    const int rc = run(replay_args(m, target), out, err);
    if (rc != ok) return rc;
    if (!m.contains("check")) {
      out << "replay finished (no comparison column recorded)\n";
      return ok;
    }
    const std::string file = m["check"].at("file").get<std::string>();
    const std::string col = m["check"].at("column").get<std::string>();
    const auto before = column(source_dir / file, col);
    const auto after = column(target / file, col);
    if (before.size() != after.size()) {
      err << "replay mismatch: " << file << " has " << after.size() << " rows, recorded "
          << before.size() << "\n";
      return numerical;
    }
    for (std::size_t i = 0; i < before.size(); ++i)
      if (before[i] != after[i]) {
        err << "replay mismatch: " << file << " row " << i + 1 << " column " << col << ": "
            << after[i] << " vs recorded " << before[i] << "\n";
        return numerical;
      }
    out << "replay reproduced " << file << " column " << col << " (" << before.size()
        << " rows)\n";
    return ok;
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + manifest_path + ": " + e.what());
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Convolutional sparse coding with stochastic subsampling", "scsc"};
  app.set_version_flag("--version", std::string(SCSC_VERSION));
  app.require_subcommand(1);

  TrainArgs batch_args;
  auto* batch = app.add_subcommand("train-batch", "Batch dictionary learning");
  Options batch_opts(batch);
  add_train_flags(batch_opts, batch_args);
  batch_opts.add("--tol", batch_args.tol, "Relative objective change that stops training");
  batch_opts.flag("--retain-unsampled", batch_args.retain_unsampled,
                  "Keep codes outside the sampled block instead of zeroing them");

  TrainArgs online_args;
  auto* online = app.add_subcommand("train-online", "Online dictionary learning");
  Options online_opts(online);
  add_train_flags(online_opts, online_args);
  online_opts.add("--minibatch", online_args.minibatch, "Signals per step");
  online_opts.path("--test-dir", online_args.test_dir, "Held-out images for test metrics");
  online_opts.add("--eval-schedule", online_args.eval_schedule, "When to evaluate test metrics")
      ->check(CLI::IsMember({"pow2", "every", "last", "none"}));
  online_opts.add("--draw", online_args.draw, "Order in which training images are drawn")
      ->check(CLI::IsMember({"sequential", "random"}));

  ApplyArgs inp_args;
  inp_args.solver.lambda = 0.4;
  inp_args.solver.admm_iters = 50;
  auto* inp = app.add_subcommand("inpaint", "Fill in randomly unobserved pixels");
  Options inp_opts(inp);
  inp_opts.path("--input", inp_args.input, "Image file or directory")->required();
  inp_opts.path("--dict", inp_args.dict, "Dictionary (.cscd)")->required();
  inp_opts.path("--out", inp_args.out, "Output directory")->required();
  inp_opts.add("--observe", inp_args.observe, "Observed pixel fraction q in (0, 1]");
  inp_opts.add("--trials", inp_args.trials, "Random masks per image");
  inp_opts.add("--seed", inp_args.seed, "Random seed");
  inp_opts.flag("--paste", inp_args.paste, "Copy observed pixels into the reconstruction");
  inp_opts.flag("--no-normalize", inp_args.no_normalize, "Skip contrast normalization");
  add_solver_flags(inp_opts, inp_args.solver);

  ApplyArgs rec_args;
  auto* rec = app.add_subcommand("reconstruct", "Sparse reconstruction with a fixed dictionary");
  Options rec_opts(rec);
  rec_opts.path("--input", rec_args.input, "Image file or directory")->required();
  rec_opts.path("--dict", rec_args.dict, "Dictionary (.cscd)")->required();
  rec_opts.path("--out", rec_args.out, "Output directory")->required();
  rec_opts.flag("--no-normalize", rec_args.no_normalize, "Skip contrast normalization");
  add_solver_flags(rec_opts, rec_args.solver);

  TrainArgs bench_args;
  bench_args.max_iters = 5;
  std::vector<double> rates{1.0, 0.5, 0.2, 0.1, 0.05};
  auto* bench = app.add_subcommand("bench", "Per-iteration timing across subsampling rates");
  Options bench_opts(bench);
  add_train_flags(bench_opts, bench_args);
  bench_opts.add("--rates", rates, "Subsampling rates to sweep")->delimiter(',');

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write synthetic grayscale scenes");
  Options synth_opts(synth);
  synth_opts.path("--out", synth_args.out, "Output directory")->required();
  synth_opts.add("--count", synth_args.count, "Number of images");
  synth_opts.add("--height", synth_args.height, "Image height");
  synth_opts.add("--width", synth_args.width, "Image width");
  synth_opts.add("--seed", synth_args.seed, "Random seed");

  std::string manifest_path, replay_out;
  auto* replay = app.add_subcommand("replay", "Re-run a recorded command and compare results");
  Options replay_opts(replay);
  replay_opts.path("--manifest", manifest_path, "manifest.json of a previous run")->required();
  replay_opts.path("--out", replay_out, "Output directory (default: <run>/replay)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? ok : usage;
  }

  try {
    if (batch->parsed()) return train_batch(batch_args, batch_opts, out);
    if (online->parsed()) return train_online(online_args, online_opts, out);
    if (inp->parsed()) return inpaint_cmd(inp_args, inp_opts, out);
    if (rec->parsed()) return reconstruct_cmd(rec_args, rec_opts, out);
    if (bench->parsed()) return bench_cmd(bench_args, rates, bench_opts, out);
    if (synth->parsed()) return synth_cmd(synth_args, synth_opts, out);
    if (replay->parsed()) return replay_cmd(manifest_path, replay_out, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return usage;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return usage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return numerical;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return io;
  } catch (const ShapeError& e) {
    err << "input error: " << e.what() << "\n";
    return io;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return io;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return numerical;
  }
  return usage;
}

}  // namespace scsc::cli
