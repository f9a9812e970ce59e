// Python bindings for the bmcmc library.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmcmc/chain.hpp"
#include "bmcmc/cj_models.hpp"
#include "bmcmc/drivers.hpp"
#include "bmcmc/fit.hpp"
#include "bmcmc/io.hpp"
#include "bmcmc/problem.hpp"
#include "bmcmc/rating_matrix.hpp"
#include "bmcmc/sim_gof.hpp"

namespace py = pybind11;
using namespace bmcmc;

namespace {

ModelVariant variant_arg(const std::string& text) {
  const auto v = parse_variant(text);
  if (!v) throw py::value_error("unknown model variant '" + text + "' (expected FSDT, SDT or CSDT)");
  return *v;
}

std::vector<std::vector<double>> rows(const std::vector<double>& flat, std::size_t width) {
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < flat.size(); k += width) {
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(k),
                     flat.begin() + static_cast<std::ptrdiff_t>(k + width));
  }
  return out;
}

RatingMatrix matrix_from_rows(const std::vector<std::vector<std::int64_t>>& counts) {
  if (counts.empty() || counts.front().size() < 2) {
    throw py::value_error("counts need at least one stimulus and two response categories");
  }
  std::vector<std::int64_t> flat;
  for (const auto& r : counts) {
    if (r.size() != counts.front().size()) throw py::value_error("counts rows differ in length");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return RatingMatrix(counts.size(), counts.front().size(), std::move(flat));
}

std::vector<std::vector<std::int64_t>> matrix_rows(const RatingMatrix& m) {
  std::vector<std::vector<std::int64_t>> out;
  for (std::size_t h = 0; h < m.n_stimuli(); ++h) out.emplace_back(m.row(h).begin(), m.row(h).end());
  return out;
}

py::dict sampling_dict(const SamplingResult& sam, bool converged_optimisation) {
  std::vector<std::vector<double>> samples;
  samples.reserve(sam.samples.size());
  for (const auto& s : sam.samples) samples.push_back(s.values);
  py::dict d;
  d["samples"] = samples;
  d["best"] = sam.best.values;
  d["best_log_density"] = sam.best.log_density;
  d["converged"] = converged_optimisation && sam.converged;
  d["proposals"] = sam.proposals;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bootstrap MCMC engine and categorical-judgment rating models";

  py::class_<CJParameters>(m, "Parameters")
      .def(py::init<>())
      .def_readwrite("signal_means", &CJParameters::signal_means)
      .def_readwrite("signal_sigmas", &CJParameters::signal_sigmas)
      .def_readwrite("criterion_means", &CJParameters::criterion_means)
      .def_readwrite("criterion_sigmas", &CJParameters::criterion_sigmas)
      .def_readwrite("free_mask", &CJParameters::free_mask)
      .def_property_readonly("n_stimuli", &CJParameters::n_stimuli)
      .def_property_readonly("n_criteria", &CJParameters::n_criteria)
      .def("names", [](const CJParameters& p) {
        std::vector<std::string> out;
        for (std::size_t k = 0; k < p.size(); ++k) out.push_back(p.name(k));
        return out;
      })
      .def("flatten", &CJParameters::flatten)
      .def("free_values", &CJParameters::free_values)
      .def("__repr__", [](const CJParameters& p) {
        return "<Parameters " + std::to_string(p.n_stimuli()) + " stimuli, " +
               std::to_string(p.n_criteria()) + " criteria, " + std::to_string(p.n_free()) + " free>";
      });

  m.def("make_template",
        [](const std::string& variant, std::size_t n_stimuli, std::size_t n_criteria) {
          return make_template(variant_arg(variant), n_stimuli, n_criteria);
        },
        py::arg("variant"), py::arg("n_stimuli"), py::arg("n_criteria"),
        "Default starting parameters for a variant.");
  m.def("fix_parameters",
        [](const CJParameters& p, const std::string& variant) { return fix_parameters(p, variant_arg(variant)); },
        py::arg("params"), py::arg("variant"), "Canonical form of a parameter set.");
  m.def("read_parameter_file", &io::read_parameter_file, py::arg("path"));
  m.def("write_parameter_file",
        [](const std::filesystem::path& path, const CJParameters& p) {
          std::ostringstream s;
          io::write_parameter_file(s, p);
          io::write_text_file(path, s.str());
        },
        py::arg("path"), py::arg("params"));

  m.def("response_matrix",
        [](const CJParameters& p, const std::string& variant) {
          return rows(response_matrix(p, variant_arg(variant)), p.n_criteria() + 1);
        },
        py::arg("params"), py::arg("variant"),
        "Response probabilities, one row of M+1 values per stimulus.");
  m.def("log_likelihood",
        [](const CJParameters& p, const std::string& variant,
           const std::vector<std::vector<std::int64_t>>& counts, bool soft) {
          return log_likelihood(p, variant_arg(variant), matrix_from_rows(counts), soft);
        },
        py::arg("params"), py::arg("variant"), py::arg("counts"), py::arg("soft_penalty") = false);

  m.def("simulate",
        [](const CJParameters& p, const std::string& variant, std::int64_t trials, std::uint64_t seed) {
          Rng rng(seed);
          return matrix_rows(simulate_matrix(p, variant_arg(variant), trials, rng));
        },
        py::arg("params"), py::arg("variant"), py::arg("trials"), py::arg("seed") = 1,
        "Simulate a rating experiment; returns counts per stimulus.");
  m.def("read_counts", [](const std::filesystem::path& path) { return matrix_rows(io::read_counts_csv(path)); },
        py::arg("path"));
  m.def("write_counts",
        [](const std::filesystem::path& path, const std::vector<std::vector<std::int64_t>>& counts) {
          std::ostringstream s;
          io::write_counts_csv(s, matrix_from_rows(counts));
          io::write_text_file(path, s.str());
        },
        py::arg("path"), py::arg("counts"));

  m.def("gof",
        [](const std::vector<std::vector<std::int64_t>>& counts,
           const std::vector<std::vector<double>>& predicted) {
          const RatingMatrix data = matrix_from_rows(counts);
          std::vector<double> flat;
          for (const auto& r : predicted) flat.insert(flat.end(), r.begin(), r.end());
          if (flat.size() != data.counts().size()) throw py::value_error("predicted shape differs from counts");
          const GofReport g = gof(data, flat);
          py::dict d;
          d["rmsd"] = g.rmsd;
          d["r_squared"] = g.r_squared;
          d["b0"] = g.b0;
          d["b0_half_width"] = g.b0_half_width;
          d["b1"] = g.b1;
          d["b1_half_width"] = g.b1_half_width;
          d["kl_bits"] = g.kl_bits;
          d["kl_floor"] = g.kl_floor;
          d["quality"] = std::string(to_string(classify(g)));
          return d;
        },
        py::arg("counts"), py::arg("predicted"), "Goodness-of-fit indicators.");

  m.def("fit",
        [](const std::vector<std::vector<std::int64_t>>& counts, const std::string& variant,
           std::optional<CJParameters> templ, int restarts, long n_e, std::uint64_t seed, int workers,
           std::optional<CJParameters> generating) {
          FitConfig config;
          config.variant = variant_arg(variant);
          config.restarts = restarts;
          config.n_e = n_e;
          config.seed = seed;
          config.workers = workers;
          validate(config);
          const RatingMatrix data = matrix_from_rows(counts);
          const CJParameters t =
              templ ? *templ : make_template(config.variant, data.n_stimuli(), data.n_responses() - 1);
          std::string report;
          {
            py::gil_scoped_release release;
            const FitResult result = run_fit(data, t, config);
            std::optional<Recovery> recovery;
            if (generating) recovery = compare_recovery(result, io::adapt_to_variant(*generating, config.variant));
            report = fit_report_json(result, recovery);
          }
          return report;
        },
        py::arg("counts"), py::arg("variant"), py::arg("template") = std::nullopt, py::arg("restarts") = 3,
        py::arg("n_e") = 4000, py::arg("seed") = 1, py::arg("workers") = 0,
        py::arg("generating") = std::nullopt, "Fit a model; returns the JSON report text.");
  m.def("report_text", &report_text, py::arg("report_json"));

  m.def("sample",
        [](const std::function<double(std::vector<double>)>& log_density, std::vector<double> start,
           long n_e, std::uint64_t seed) {
          if (start.empty()) throw py::value_error("start must have at least one parameter");
          FunctionProblem problem(start.size(), [&](std::span<const double> x) {
            return log_density(std::vector<double>(x.begin(), x.end()));
          });
          Rng rng(seed);
          const ChainConfig chain;
          auto opt = run_optimisation(problem, start, chain, OptimisationConfig{}, rng);
          const bool opt_converged = opt.converged;
          const auto sam = run_sampling(problem, std::move(opt.state), n_e, chain, SamplingConfig{}, rng);
          return sampling_dict(sam, opt_converged);
        },
        py::arg("log_density"), py::arg("start"), py::arg("n_e") = 4000, py::arg("seed") = 1,
        "Optimise then sample an arbitrary log density given as a Python callable.");
}
