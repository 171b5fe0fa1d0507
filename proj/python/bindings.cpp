#include <scsc/scsc.hpp>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace scsc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array dict_to_array(const Dictionary& d) {
  Array out({py::ssize_t(d.num_filters()), py::ssize_t(d.side()), py::ssize_t(d.side())});
  std::copy(d.coeffs().data(), d.coeffs().data() + d.coeffs().size(), out.mutable_data());
  return out;
}

Dictionary array_to_dict(const Array& a) {
  if (a.ndim() != 3 || a.shape(1) != a.shape(2))
    throw ShapeError("dictionary array must have shape (K, m, m)");
  Dictionary d(int(a.shape(0)), int(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), d.coeffs().data());
  return d;
}

Array codes_to_array(const CodeMap& z) {
  const Geometry g = z.geometry();
  Array out({py::ssize_t(z.num_filters()), py::ssize_t(g.height), py::ssize_t(g.width)});
  std::copy(z.coeffs().data(), z.coeffs().data() + z.size(), out.mutable_data());
  return out;
}

CodeMap array_to_codes(const Array& a) {
  if (a.ndim() != 3) throw ShapeError("code array must have shape (K, H, W)");
  CodeMap z(int(a.shape(0)), {int(a.shape(1)), int(a.shape(2))});
  std::copy(a.data(), a.data() + a.size(), z.coeffs().data());
  return z;
}

py::list trace_to_list(const TrainTrace& t) {
  py::list rows;
  for (const auto& r : t.rows) {
    py::dict d;
    d["iter"] = r.iteration;
    d["wall_s"] = r.wall_seconds;
    d["objective"] = r.objective;
    d["test_objective"] = r.test_objective ? py::cast(*r.test_objective) : py::none();
    d["test_psnr_db"] = r.test_psnr_db ? py::cast(*r.test_psnr_db) : py::none();
    d["nnz_frac"] = r.nonzero_fraction;
    rows.append(d);
  }
  return rows;
}

TrainConfig make_config(int filters, int filter_size, double lambda, double subsample,
                        int max_iters, std::uint64_t seed, int admm_iters, double tol,
                        int workers, int minibatch, const std::string& eval_schedule) {
  TrainConfig c;
  c.num_filters = filters;
  c.filter_side = filter_size;
  c.lambda = lambda;
  c.subsample_rate = subsample;
  c.max_outer = max_iters;
  c.seed = seed;
  c.admm_iterations = admm_iters;
  c.tol = tol;
  c.workers = workers;
  c.minibatch = minibatch;
  if (eval_schedule == "pow2") c.eval_schedule = EvalSchedule::pow2;
  else if (eval_schedule == "every") c.eval_schedule = EvalSchedule::every;
  else if (eval_schedule == "last") c.eval_schedule = EvalSchedule::last;
  else if (eval_schedule == "none") c.eval_schedule = EvalSchedule::none;
  else throw ConfigError("eval_schedule must be pow2, every, last or none");
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_scsc, m) {
  m.doc() = "Convolutional sparse coding with stochastic subsampling";
  m.attr("__version__") = SCSC_VERSION;

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("contrast_normalize", [](const Signal& img) { return contrast_normalize(img); },
        py::arg("image"));
  m.def("random_dictionary",
        [](int k, int m_, std::uint64_t seed) { return dict_to_array(random_dictionary(k, m_, seed)); },
        py::arg("filters"), py::arg("filter_size"), py::arg("seed") = 0);
  m.def("synthetic_scene",
        [](int h, int w, std::uint64_t seed, std::uint64_t index) {
          return synthetic_scene({h, w}, seed, index);
        },
        py::arg("height"), py::arg("width"), py::arg("seed") = 0, py::arg("index") = 0);

  m.def(
      "train_batch",
      [](const std::vector<Signal>& images, int filters, int filter_size, double lambda,
         double subsample, int max_iters, std::uint64_t seed, int admm_iters, double tol,
         int workers, std::optional<Array> init, bool retain_unsampled) {
        TrainConfig cfg = make_config(filters, filter_size, lambda, subsample, max_iters, seed,
                                      admm_iters, tol, workers, 1, "none");
        cfg.retain_unsampled = retain_unsampled;
        std::optional<Dictionary> d0;
        if (init) d0 = array_to_dict(*init);
        SbcscResult r;
        {
          py::gil_scoped_release release;
          r = train_sbcsc(images, cfg, d0 ? &*d0 : nullptr);
        }
        py::dict out;
        out["dictionary"] = dict_to_array(r.dictionary);
        out["trace"] = trace_to_list(r.trace);
        out["converged"] = r.converged;
        return out;
      },
      py::arg("images"), py::arg("filters") = 100, py::arg("filter_size") = 11,
      py::arg("lambda_") = 1.0, py::arg("subsample") = 1.0, py::arg("max_iters") = 20,
      py::arg("seed") = 0, py::arg("admm_iters") = 10, py::arg("tol") = 1e-3,
      py::arg("workers") = 0, py::arg("init") = py::none(),
      py::arg("retain_unsampled") = false);

  m.def(
      "train_online",
      [](const std::vector<Signal>& images, int filters, int filter_size, double lambda,
         double subsample, int max_iters, std::uint64_t seed, int admm_iters, int minibatch,
         const std::vector<Signal>& test_images, const std::string& eval_schedule, int workers) {
        const TrainConfig cfg = make_config(filters, filter_size, lambda, subsample, max_iters,
                                            seed, admm_iters, 0.0, workers, minibatch,
                                            eval_schedule);
        SocscResult r;
        {
          py::gil_scoped_release release;
          r = train_socsc(StreamSource(images), cfg, test_images);
        }
        py::dict out;
        out["dictionary"] = dict_to_array(r.dictionary);
        out["trace"] = trace_to_list(r.trace);
        out["samples_seen"] = r.surrogate.count();
        return out;
      },
      py::arg("images"), py::arg("filters") = 100, py::arg("filter_size") = 11,
      py::arg("lambda_") = 1.0, py::arg("subsample") = 1.0, py::arg("max_iters") = 20,
      py::arg("seed") = 0, py::arg("admm_iters") = 10, py::arg("minibatch") = 1,
      py::arg("test_images") = std::vector<Signal>{}, py::arg("eval_schedule") = "pow2",
      py::arg("workers") = 0);

  m.def(
      "infer_codes",
      [](const Signal& img, const Array& dict, double lambda, int admm_iters) {
        return codes_to_array(infer_codes(img, array_to_dict(dict), lambda, admm_iters));
      },
      py::arg("image"), py::arg("dictionary"), py::arg("lambda_") = 1.0,
      py::arg("admm_iters") = 10);
  m.def(
      "reconstruct",
      [](const Array& codes, const Array& dict) {
        const CodeMap z = array_to_codes(codes);
        return Signal(DictOperator(array_to_dict(dict), z.geometry()).apply(z));
      },
      py::arg("codes"), py::arg("dictionary"));
  m.def(
      "objective",
      [](const Signal& img, const Array& dict, const Array& codes, double lambda) {
        return objective(img, array_to_dict(dict), array_to_codes(codes), lambda);
      },
      py::arg("image"), py::arg("dictionary"), py::arg("codes"), py::arg("lambda_"));
  m.def(
      "observation_mask",
      [](int h, int w, double rate, std::uint64_t seed) {
        return ObservationMask::random({h, w}, rate, seed).weights();
      },
      py::arg("height"), py::arg("width"), py::arg("rate"), py::arg("seed") = 0);
  m.def(
      "inpaint",
      [](const Signal& observed, const Grid& mask, const Array& dict, double lambda,
         int admm_iters, bool paste) {
        return inpaint(observed, ObservationMask(mask), array_to_dict(dict), lambda, admm_iters,
                       paste)
            .reconstruction;
      },
      py::arg("observed"), py::arg("mask"), py::arg("dictionary"), py::arg("lambda_") = 0.4,
      py::arg("admm_iters") = 50, py::arg("paste") = false);

  m.def("psnr", &psnr, py::arg("reference"), py::arg("reconstruction"), py::arg("peak") = 1.0);
  m.def("psnr_rescaled", &psnr_rescaled, py::arg("reference"), py::arg("reconstruction"));
  m.def(
      "nonzero_fraction",
      [](const Array& codes, double threshold) {
        return nonzero_fraction(array_to_codes(codes), threshold);
      },
      py::arg("codes"), py::arg("threshold") = 0.1);

  m.def("read_image", &read_image, py::arg("path"));
  m.def("write_image", &write_image, py::arg("path"), py::arg("image"));
  m.def(
      "read_dictionary",
      [](const std::filesystem::path& p) { return dict_to_array(read_dictionary(p)); },
      py::arg("path"));
  m.def(
      "write_dictionary",
      [](const std::filesystem::path& p, const Array& d) { write_dictionary(p, array_to_dict(d)); },
      py::arg("path"), py::arg("dictionary"));
}
