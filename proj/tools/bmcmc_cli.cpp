// bmcmc: simulate rating data, fit categorical-judgment models, assess fits.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bmcmc/fit.hpp"
#include "bmcmc/io.hpp"
#include "bmcmc/sim_gof.hpp"

namespace fs = std::filesystem;
using namespace bmcmc;

namespace {

constexpr int kOk = 0;
constexpr int kFlagged = 1;
constexpr int kUsage = 2;

constexpr const char* kOutputDirVariable = "BMCMC_OUTPUT_DIR";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_output_dir() {
  const char* env = std::getenv(kOutputDirVariable);
  return env && *env ? fs::path(env) : fs::path(".");
}

ModelVariant require_variant(const std::string& text) {
  const auto v = parse_variant(text);
  if (!v) throw UsageError("unknown variant '" + text + "' (expected FSDT, SDT or CSDT)");
  return *v;
}

void check_dimensions(const CJParameters& p, const RatingMatrix& data) {
  if (p.n_stimuli() != data.n_stimuli() || p.n_criteria() + 1 != data.n_responses()) {
    throw UsageError("parameters describe " + std::to_string(p.n_stimuli()) + " stimuli and " +
                     std::to_string(p.n_criteria() + 1) + " responses but the data have " +
                     std::to_string(data.n_stimuli()) + " and " +
                     std::to_string(data.n_responses()));
  }
}

template <typename Writer>
std::string render(Writer&& w) {
  std::ostringstream s;
  w(s);
  return s.str();
}

std::string plot_csv_predicted(const RatingMatrix& data, const std::vector<double>& predicted,
                               const std::vector<Interval>& limits) {
  std::ostringstream out;
  out << "stimulus,response,observed,point,lo,hi,diagonal\n";
  const auto p = data.proportions();
  for (std::size_t h = 0; h < data.n_stimuli(); ++h) {
    for (std::size_t i = 0; i < data.n_responses(); ++i) {
      const std::size_t c = h * data.n_responses() + i;
      out << h + 1 << ',' << i + 1 << ',' << io::format_double(p[c]) << ','
          << io::format_double(predicted[c]) << ',' << io::format_double(limits[c].lo) << ','
          << io::format_double(limits[c].hi) << ',' << io::format_double(p[c]) << '\n';
    }
  }
  return out.str();
}

struct SimulateArgs {
  std::string params;
  std::string variant;
  long long trials = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  const ModelVariant variant = require_variant(a.variant);
  if (a.trials < 1) throw UsageError("--trials must be at least 1");
  const CJParameters params = io::read_parameter_file(a.params);
  Rng rng(a.seed);
  const RatingMatrix data = simulate_matrix(params, variant, a.trials, rng);
  const fs::path out = a.out.empty() ? default_output_dir() / "counts.csv" : fs::path(a.out);
  io::write_text_file(out, render([&](std::ostream& s) { io::write_counts_csv(s, data); }));
  io::write_text_file(io::sidecar_path(out),
                      io::simulation_sidecar_json({variant, a.seed, a.trials, params}));
  std::cout << "wrote " << out.string() << " (" << data.n_stimuli() << " x " << data.n_responses()
            << ", " << a.trials << " trials per stimulus)\n";
  return kOk;
}

struct FitArgs {
  std::string data;
  std::string variant;
  std::string params;
  std::string generating;
  std::string out_dir;
  std::string width_mode = "sqrt_sd";
  std::optional<double> v_star;
  FitConfig config;
};

int cmd_fit(FitArgs a) {
  a.config.variant = require_variant(a.variant);
  if (a.width_mode == "sd") {
    a.config.chain.prespecified_width = PrespecifiedWidth::sd;
  } else if (a.width_mode != "sqrt_sd") {
    throw UsageError("--width-mode must be sqrt_sd or sd");
  }
  try {
    validate(a.config);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const RatingMatrix data = io::read_counts_csv(a.data);
  CJParameters templ = a.params.empty()
                           ? make_template(a.config.variant, data.n_stimuli(), data.n_responses() - 1)
                           : io::adapt_to_variant(io::read_parameter_file(a.params), a.config.variant);
  check_dimensions(templ, data);
  if (a.v_star) a.config.chain.v_star.assign(templ.n_free(), *a.v_star);

  std::optional<io::SimulationRecord> sidecar;
  if (!a.generating.empty()) {
    sidecar = io::read_simulation_sidecar(a.generating);
    if (!sidecar) throw UsageError("cannot find " + a.generating);
  } else {
    sidecar = io::read_simulation_sidecar(io::sidecar_path(a.data));
  }

  const FitResult fit = run_fit(data, templ, a.config);
  std::optional<Recovery> recovery;
  if (sidecar) recovery = compare_recovery(fit, sidecar->generating);

  const fs::path dir = a.out_dir.empty() ? default_output_dir() : fs::path(a.out_dir);
  const std::string report = fit_report_json(fit, recovery);
  io::write_text_file(dir / "report.json", report);
  io::write_text_file(dir / "report.txt", report_text(report));
  io::write_text_file(dir / "parameters.txt",
                      render([&](std::ostream& s) { io::write_parameter_file(s, fit.best); }));

  std::ostringstream params_csv;
  params_csv << "name,point,lo,hi,free\n";
  const auto flat = fit.best.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    params_csv << fit.best.name(k) << ',' << io::format_double(flat[k]) << ','
               << io::format_double(fit.limits[k].lo) << ',' << io::format_double(fit.limits[k].hi)
               << ',' << (fit.best.free_mask[k] ? 1 : 0) << '\n';
  }
  io::write_text_file(dir / "parameters.csv", params_csv.str());
  io::write_text_file(dir / "predicted.csv",
                      plot_csv_predicted(data, fit.predicted, fit.predicted_limits));

  std::vector<std::string> names;
  for (std::size_t k : fit.free_index) names.push_back(fit.best.name(k));
  const auto& chosen = fit.restarts[fit.selected];
  io::write_text_file(dir / "samples.csv", render([&](std::ostream& s) {
                        io::write_samples_csv(s, chosen.samples, names);
                      }));
  if (a.config.keep_trace) {
    for (std::size_t r = 0; r < fit.restarts.size(); ++r) {
      io::write_text_file(dir / ("trace_" + std::to_string(r + 1) + ".csv"),
                          render([&](std::ostream& s) {
                            io::write_trace_csv(s, fit.restarts[r].trace);
                          }));
    }
  }
  if (recovery) {
    std::ostringstream rec;
    rec << "name,generating,rescaled,point,lo,hi,diagonal\n";
    for (std::size_t j = 0; j < recovery->free_index.size(); ++j) {
      rec << names[j] << ',' << io::format_double(recovery->generating[j]) << ','
          << io::format_double(recovery->rescaled[j]) << ','
          << io::format_double(recovery->recovered[j]) << ','
          << io::format_double(recovery->limits[j].lo) << ','
          << io::format_double(recovery->limits[j].hi) << ','
          << io::format_double(recovery->rescaled[j]) << '\n';
    }
    io::write_text_file(dir / "recovery.csv", rec.str());
  }
  std::cout << report_text(report);
  return fit.flagged ? kFlagged : kOk;
}

struct GofArgs {
  std::string data;
  std::string params;
  std::string variant;
  std::string out_dir;
};

int cmd_gof(const GofArgs& a) {
  const ModelVariant variant = require_variant(a.variant);
  const RatingMatrix data = io::read_counts_csv(a.data);
  const CJParameters params = io::read_parameter_file(a.params);
  check_dimensions(params, data);
  const auto predicted = response_matrix(params, variant);
  const GofReport g = gof(data, predicted);
  const FitQuality quality = classify(g);

  nlohmann::ordered_json j;
  j["command"] = "gof";
  j["variant"] = std::string(to_string(variant));
  j["data"] = {{"n_stimuli", data.n_stimuli()},
               {"n_responses", data.n_responses()},
               {"trials_per_stimulus", data.trials_per_stimulus()}};
  j["log_l"] = log_likelihood(params, variant, data, false);
  j["log_l_soft"] = log_likelihood(params, variant, data, true);
  j["gof"] = {{"rmsd", g.rmsd},
              {"r_squared", g.r_squared},
              {"b0", g.b0},
              {"b0_half_width", g.b0_half_width},
              {"b1", g.b1},
              {"b1_half_width", g.b1_half_width},
              {"kl_bits", g.kl_bits},
              {"kl_floor", g.kl_floor}};
  j["quality"] = std::string(to_string(quality));
  j["flagged"] = quality == FitQuality::unacceptable;
  const std::string report = j.dump(2) + "\n";

  const fs::path dir = a.out_dir.empty() ? default_output_dir() : fs::path(a.out_dir);
  io::write_text_file(dir / "gof.json", report);
  io::write_text_file(dir / "gof.txt", report_text(report));
  std::vector<Interval> point_limits;
  for (double p : predicted) point_limits.push_back({p, p});
  io::write_text_file(dir / "gof_predicted.csv", plot_csv_predicted(data, predicted, point_limits));
  std::cout << report_text(report);
  return quality == FitQuality::unacceptable ? kFlagged : kOk;
}

int cmd_report(const std::string& path_text) {
  fs::path path(path_text);
  if (fs::is_directory(path)) path /= "report.json";
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    std::cout << report_text(buf.str());
    return report_flagged(buf.str()) ? kFlagged : kOk;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path.string() + ": not a report (" + e.what() + ")");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bootstrap MCMC fitting of categorical-judgment rating models"};
  app.require_subcommand(1);
  app.footer(std::string("Outputs go to $") + kOutputDirVariable +
             " unless a path is given (default: current directory).");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate a rating experiment trial by trial");
  simulate->add_option("--params", sim.params, "Generating parameter file")->required();
  simulate->add_option("--variant", sim.variant, "FSDT, SDT or CSDT")->required();
  simulate->add_option("--trials", sim.trials, "Trials per stimulus")->required();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Counts CSV to write (default $" +
                                             std::string(kOutputDirVariable) + "/counts.csv)");

  FitArgs fa;
  FitConfig& fc = fa.config;
  auto* fit = app.add_subcommand("fit", "Fit a model to a counts file");
  fit->add_option("--data", fa.data, "Counts CSV")->required();
  fit->add_option("--variant", fa.variant, "FSDT, SDT or CSDT")->required();
  fit->add_option("--params", fa.params, "Parameter template (default: built-in template)");
  fit->add_option("--generating", fa.generating,
                  "Simulation sidecar for recovery plots (default: the data file's sidecar if present)");
  fit->add_option("--out-dir", fa.out_dir, "Output directory");
  fit->add_option("--restarts", fc.restarts, "Independent restarts")->capture_default_str();
  fit->add_option("--n-e", fc.n_e, "Samples per sampling run")->capture_default_str();
  fit->add_option("--seed", fc.seed, "Base seed; restart r uses seed + r")->capture_default_str();
  fit->add_option("--workers", fc.workers, "Threads for restarts (0: automatic)")
      ->capture_default_str();
  fit->add_option("--jitter", fc.jitter, "Start perturbation half-range")->capture_default_str();
  fit->add_option("--level", fc.confidence_level, "Confidence level")->capture_default_str();
  fit->add_option("--predicted-samples", fc.predicted_samples,
                  "Thinned samples for predicted-probability limits")
      ->capture_default_str();
  fit->add_flag("--trace", fc.keep_trace, "Write one trace CSV per restart");
  fit->add_option("--t-initial", fc.chain.initial_temperature, "Initial temperature")
      ->capture_default_str();
  fit->add_option("--t-target", fc.chain.target_temperature, "Target temperature")
      ->capture_default_str();
  fit->add_option("--anneal-decay", fc.chain.anneal_decay, "Per-acceptance temperature decay")
      ->capture_default_str();
  fit->add_option("--reset-factor", fc.chain.reset_temperature_factor,
                  "Temperature multiplier on reset")
      ->capture_default_str();
  fit->add_option("--reset-tolerance", fc.chain.reset_tolerance,
                  "Reset when a new maximum beats the best by this many temperatures")
      ->capture_default_str();
  fit->add_option("--bootstrap-fraction", fc.chain.bootstrap_fraction,
                  "Probability of a bootstrap proposal")
      ->capture_default_str();
  fit->add_option("--target-acceptance", fc.chain.target_acceptance, "Acceptance rate target")
      ->capture_default_str();
  fit->add_option("--lambda", fc.chain.lambda_initial, "Initial step scale")->capture_default_str();
  fit->add_option("--lambda-factor", fc.chain.lambda_factor, "Step scale adjustment factor")
      ->capture_default_str();
  fit->add_option("--t-lambda", fc.chain.t_lambda_initial, "Initial adaptation window")
      ->capture_default_str();
  fit->add_option("--t-lambda-growth", fc.chain.t_lambda_growth, "Window growth without adjustment")
      ->capture_default_str();
  fit->add_option("--t-lambda-floor", fc.chain.t_lambda_floor, "Smallest adaptation window")
      ->capture_default_str();
  fit->add_option("--keep-fraction", fc.chain.archive_keep_fraction, "Archive kept on reset")
      ->capture_default_str();
  fit->add_option("--width-mode", fa.width_mode, "Gaussian generator width: sqrt_sd or sd")
      ->capture_default_str();
  fit->add_option("--v-star", fa.v_star, "Start-up Gaussian width for every parameter (default 0.5)");
  fit->add_option("--drift-stride", fc.optimisation.drift_stride,
                  "Accepted steps between drift samples")
      ->capture_default_str();
  fit->add_option("--drift-threshold", fc.optimisation.drift_threshold,
                  "Reversals needed (0: max(10, parameters))")
      ->capture_default_str();
  fit->add_option("--exploration", fc.optimisation.exploration_constant,
                  "Accepted steps since reset, in units of 1/lambda^2")
      ->capture_default_str();
  fit->add_option("--opt-max-proposals", fc.optimisation.max_proposals, "Optimisation proposal cap")
      ->capture_default_str();
  fit->add_option("--ergodic-factor", fc.sampling.ergodic_factor,
                  "Sampling budget factor on parameters x N_e")
      ->capture_default_str();
  fit->add_option("--sample-max-proposals", fc.sampling.max_proposals, "Sampling proposal cap")
      ->capture_default_str();
  fit->add_option("--rel-tol", fc.likelihood.rel_tol, "Quadrature relative tolerance")
      ->capture_default_str();
  fit->add_option("--abs-tol", fc.likelihood.abs_tol, "Quadrature absolute tolerance")
      ->capture_default_str();

  GofArgs ga;
  auto* gof_cmd = app.add_subcommand("gof", "Goodness of fit of a parameter file to a counts file");
  gof_cmd->add_option("--data", ga.data, "Counts CSV")->required();
  gof_cmd->add_option("--params", ga.params, "Parameter file")->required();
  gof_cmd->add_option("--variant", ga.variant, "FSDT, SDT or CSDT")->required();
  gof_cmd->add_option("--out-dir", ga.out_dir, "Output directory");

  std::string report_path;
  auto* report = app.add_subcommand("report", "Print a fit or gof report");
  report->add_option("path", report_path, "report.json or the directory holding it")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*fit) return cmd_fit(fa);
    if (*gof_cmd) return cmd_gof(ga);
    if (*report) return cmd_report(report_path);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const io::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFlagged;
  }
  return kUsage;
}
