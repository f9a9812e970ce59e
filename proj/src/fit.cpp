#include "bmcmc/fit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace bmcmc {

using json = nlohmann::ordered_json;

void validate(const FitConfig& c) {
  if (c.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (c.n_e < static_cast<long>(kMinimumSamplesForLimits)) {
    throw std::invalid_argument("N_e must be >= " + std::to_string(kMinimumSamplesForLimits));
  }
  if (c.workers < 0) throw std::invalid_argument("workers must be >= 0");
  if (!(c.jitter >= 0.0 && c.jitter < 1.0)) throw std::invalid_argument("jitter must lie in [0, 1)");
  if (!(c.confidence_level > 0.0 && c.confidence_level < 1.0)) {
    throw std::invalid_argument("confidence level must lie in (0, 1)");
  }
  if (c.predicted_samples < static_cast<long>(kMinimumSamplesForLimits)) {
    throw std::invalid_argument("predicted samples must be >= " +
                                std::to_string(kMinimumSamplesForLimits));
  }
  if (!(c.chain.initial_temperature >= c.chain.target_temperature &&
        c.chain.target_temperature > 0.0)) {
    throw std::invalid_argument("need initial temperature >= target temperature > 0");
  }
  if (!(c.chain.anneal_decay > 0.0 && c.chain.anneal_decay < 1.0)) {
    throw std::invalid_argument("anneal decay must lie in (0, 1)");
  }
  if (!(c.chain.bootstrap_fraction >= 0.0 && c.chain.bootstrap_fraction <= 1.0)) {
    throw std::invalid_argument("bootstrap fraction must lie in [0, 1]");
  }
  if (!(c.chain.lambda_initial > 0.0 && c.chain.lambda_factor > 1.0)) {
    throw std::invalid_argument("need lambda > 0 and lambda factor > 1");
  }
  if (c.chain.t_lambda_initial < 1 || c.chain.t_lambda_floor < 1 || c.chain.t_lambda_growth < 1.0) {
    throw std::invalid_argument("t_lambda settings must be positive (growth >= 1)");
  }
  if (!(c.chain.archive_keep_fraction > 0.0 && c.chain.archive_keep_fraction <= 1.0)) {
    throw std::invalid_argument("archive keep fraction must lie in (0, 1]");
  }
  for (double v : c.chain.v_star) {
    if (!(v > 0.0)) throw std::invalid_argument("V* widths must be positive");
  }
}

namespace {

constexpr int kStartDraws = 100;

// Jittered template values, redrawn while the likelihood cannot be computed
// there. Falls back to the template itself.
std::vector<double> jittered_start(const CJProblem& problem, const FitConfig& config, Rng& rng) {
  const CJParameters& templ = problem.parameter_template();
  std::uniform_real_distribution<double> u(-config.jitter, config.jitter);
  for (int draw = 0; draw < kStartDraws; ++draw) {
    std::vector<double> raw = templ.free_values();
    for (double& v : raw) v = v == 0.0 ? u(rng) : v * (1.0 + u(rng));
    std::vector<double> start = fix_parameters(raw, templ, config.variant).free_values();
    if (evaluate(problem, start).computable()) return start;
  }
  return fix_parameters(templ, config.variant).free_values();
}

RestartResult run_restart(const CJProblem& problem, const FitConfig& config, int r) {
  RestartResult out;
  out.seed = config.seed + static_cast<std::uint64_t>(r);
  Rng rng(out.seed);
  out.start = jittered_start(problem, config, rng);

  TraceSink sink;
  if (config.keep_trace) sink = [&out](const StepRecord& s) { out.trace.push_back(s); };

  auto opt = run_optimisation(problem, out.start, config.chain, config.optimisation, rng, sink);
  out.optimisation_converged = opt.converged;
  out.optimisation_proposals = opt.proposals;
  auto sam = run_sampling(problem, std::move(opt.state), config.n_e, config.chain, config.sampling,
                          rng, sink);
  out.sampling_converged = sam.converged;
  out.sampling_proposals = sam.proposals;
  out.resets = sam.state.resets;
  out.uncomputable = sam.state.uncomputable;
  out.best = sam.best.log_density >= opt.best.log_density ? sam.best : opt.best;
  out.samples = std::move(sam.samples);

  const CJParameters best = problem.unpack(out.best.values);
  out.log_l = log_likelihood(best, config.variant, problem.data(), false, config.likelihood);
  out.log_l_soft = log_likelihood(best, config.variant, problem.data(), true, config.likelihood);
  return out;
}

}  // namespace

FitResult run_fit(const RatingMatrix& data, const CJParameters& parameter_template,
                  const FitConfig& config) {
  validate(config);
  FitResult fit;
  fit.config = config;
  fit.data = data;
  fit.parameter_template = parameter_template;
  const CJProblem problem(data, parameter_template, config.variant, config.likelihood);
  if (problem.n_parameters() == 0) throw std::invalid_argument("run_fit: no free parameters");

  fit.restarts.resize(static_cast<std::size_t>(config.restarts));
  int workers = config.workers;
  if (workers == 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, config.restarts);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int r = next++; r < config.restarts; r = next++) {
      try {
        fit.restarts[static_cast<std::size_t>(r)] = run_restart(problem, config, r);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> log_ls;
  for (std::size_t r = 0; r < fit.restarts.size(); ++r) {
    log_ls.push_back(fit.restarts[r].log_l);
    if (fit.restarts[r].log_l > fit.restarts[fit.selected].log_l) fit.selected = r;
    fit.converged = fit.converged || fit.restarts[r].converged();
  }
  const RestartResult& chosen = fit.restarts[fit.selected];
  fit.best = problem.unpack(chosen.best.values);
  fit.log_l = chosen.log_l;
  fit.log_l_soft = chosen.log_l_soft;

  const auto flat = fit.best.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    if (fit.best.free_mask[k]) fit.free_index.push_back(k);
  }
  fit.limits.resize(flat.size());
  for (std::size_t k = 0; k < flat.size(); ++k) fit.limits[k] = {flat[k], flat[k]};

  std::vector<std::vector<double>> sample_values;
  sample_values.reserve(chosen.samples.size());
  for (const auto& s : chosen.samples) sample_values.push_back(s.values);
  if (sample_values.size() >= kMinimumSamplesForLimits) {
    const auto free_limits = confidence_limits(sample_values, config.confidence_level);
    for (std::size_t j = 0; j < fit.free_index.size(); ++j) {
      fit.limits[fit.free_index[j]] = free_limits[j];
    }
  }

  fit.predicted = response_matrix(fit.best, config.variant, config.likelihood);
  fit.predicted_limits.assign(fit.predicted.size(), Interval{});
  for (std::size_t c = 0; c < fit.predicted.size(); ++c) {
    fit.predicted_limits[c] = {fit.predicted[c], fit.predicted[c]};
  }
  const std::size_t n_thin =
      std::min(sample_values.size(), static_cast<std::size_t>(config.predicted_samples));
  std::vector<std::vector<double>> predicted_samples;
  for (std::size_t k = 0; k < n_thin; ++k) {
    const std::size_t s = k * sample_values.size() / n_thin;
    try {
      predicted_samples.push_back(
          response_matrix(problem.unpack(sample_values[s]), config.variant, config.likelihood));
    } catch (const quad::RombergError&) {
      // skipped; limits come from the computable samples
    } catch (const std::domain_error&) {
    }
  }
  if (predicted_samples.size() >= kMinimumSamplesForLimits) {
    fit.predicted_limits = confidence_limits(predicted_samples, config.confidence_level);
  }

  fit.dof = rating_dof(data);
  fit.consistency = consistency(log_ls, fit.dof);
  fit.gof = gof(data, fit.predicted);
  fit.quality = classify(fit.gof);
  fit.flagged = !fit.converged || !fit.consistency.consistent ||
                fit.quality == FitQuality::unacceptable;
  return fit;
}

Recovery compare_recovery(const FitResult& fit, const CJParameters& generating) {
  if (generating.n_stimuli() != fit.best.n_stimuli() ||
      generating.n_criteria() != fit.best.n_criteria()) {
    throw std::invalid_argument("compare_recovery: generating parameters have other dimensions");
  }
  CJParameters gen = generating;
  gen.free_mask = fit.best.free_mask;
  gen = fix_parameters(gen, fit.config.variant);

  Recovery rec;
  rec.free_index = fit.free_index;
  const auto g_flat = gen.flatten();
  const auto r_flat = fit.best.flatten();
  for (std::size_t k : rec.free_index) {
    rec.generating.push_back(g_flat[k]);
    rec.recovered.push_back(r_flat[k]);
    rec.limits.push_back(fit.limits[k]);
  }
  std::tie(rec.b, rec.rescaled) = rescale_generating(rec.recovered, rec.generating);
  rec.hits = coverage_check(rec.recovered, rec.limits, rec.rescaled);
  rec.log_l_generating = log_likelihood(generating, fit.config.variant, fit.data, false,
                                        fit.config.likelihood);
  return rec;
}

namespace {

json chain_json(const ChainConfig& c) {
  json j;
  j["initial_temperature"] = c.initial_temperature;
  j["target_temperature"] = c.target_temperature;
  j["anneal_decay"] = c.anneal_decay;
  j["reset_temperature_factor"] = c.reset_temperature_factor;
  j["reset_tolerance"] = c.reset_tolerance;
  j["bootstrap_fraction"] = c.bootstrap_fraction;
  j["target_acceptance"] = c.target_acceptance;
  j["lambda_initial"] = c.lambda_initial;
  j["lambda_factor"] = c.lambda_factor;
  j["t_lambda_initial"] = c.t_lambda_initial;
  j["t_lambda_growth"] = c.t_lambda_growth;
  j["t_lambda_floor"] = c.t_lambda_floor;
  j["archive_keep_fraction"] = c.archive_keep_fraction;
  j["prespecified_width"] = std::string(to_string(c.prespecified_width));
  j["v_star"] = c.v_star;
  return j;
}

json gof_json(const GofReport& g) {
  return json{{"rmsd", g.rmsd},
              {"r_squared", g.r_squared},
              {"b0", g.b0},
              {"b0_half_width", g.b0_half_width},
              {"b1", g.b1},
              {"b1_half_width", g.b1_half_width},
              {"kl_bits", g.kl_bits},
              {"kl_floor", g.kl_floor}};
}

}  // namespace

std::string fit_report_json(const FitResult& fit, const std::optional<Recovery>& recovery) {
  const FitConfig& c = fit.config;
  json j;
  j["command"] = "fit";
  j["variant"] = std::string(to_string(c.variant));
  j["seed"] = c.seed;
  j["restarts"] = c.restarts;
  j["workers"] = c.workers;
  j["n_e"] = c.n_e;
  j["jitter"] = c.jitter;
  j["confidence_level"] = c.confidence_level;
  j["predicted_samples"] = c.predicted_samples;
  j["engine"] = chain_json(c.chain);
  j["optimisation"] = {{"drift_stride", c.optimisation.drift_stride},
                       {"drift_threshold", c.optimisation.drift_threshold},
                       {"exploration_constant", c.optimisation.exploration_constant},
                       {"max_proposals", c.optimisation.max_proposals}};
  j["sampling"] = {{"ergodic_factor", c.sampling.ergodic_factor},
                   {"max_proposals", c.sampling.max_proposals}};
  j["likelihood"] = {{"rel_tol", c.likelihood.rel_tol},
                     {"abs_tol", c.likelihood.abs_tol},
                     {"min_levels", c.likelihood.min_levels},
                     {"max_levels", c.likelihood.max_levels}};
  j["data"] = {{"n_stimuli", fit.data.n_stimuli()},
               {"n_responses", fit.data.n_responses()},
               {"trials_per_stimulus", fit.data.trials_per_stimulus()}};

  json restarts = json::array();
  for (const auto& r : fit.restarts) {
    restarts.push_back({{"seed", r.seed},
                        {"log_l", r.log_l},
                        {"log_l_soft", r.log_l_soft},
                        {"optimisation_converged", r.optimisation_converged},
                        {"sampling_converged", r.sampling_converged},
                        {"optimisation_proposals", r.optimisation_proposals},
                        {"sampling_proposals", r.sampling_proposals},
                        {"resets", r.resets},
                        {"uncomputable", r.uncomputable},
                        {"samples", r.samples.size()}});
  }
  j["restart_results"] = restarts;
  j["selected_restart"] = fit.selected + 1;
  j["log_l"] = fit.log_l;
  j["log_l_soft"] = fit.log_l_soft;
  j["dof"] = fit.dof;
  j["consistency"] = {{"spread_per_dof", fit.consistency.spread_per_dof},
                      {"consistent", fit.consistency.consistent}};

  json params = json::array();
  const auto flat = fit.best.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    params.push_back({{"name", fit.best.name(k)},
                      {"value", flat[k]},
                      {"lo", fit.limits[k].lo},
                      {"hi", fit.limits[k].hi},
                      {"free", static_cast<bool>(fit.best.free_mask[k])}});
  }
  j["parameters"] = params;
  j["gof"] = gof_json(fit.gof);
  j["quality"] = std::string(to_string(fit.quality));
  j["converged"] = fit.converged;
  j["flagged"] = fit.flagged;
  if (recovery) {
    j["recovery"] = {{"b", recovery->b},
                     {"hits", recovery->hits},
                     {"free_parameters", recovery->free_index.size()},
                     {"log_l_generating", recovery->log_l_generating}};
  }
  return j.dump(2) + "\n";
}

namespace {

double as_double(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

std::string fixed(const json& v, int digits) {
  const double x = as_double(v);
  if (!std::isfinite(x)) return x > 0 ? "inf" : (x < 0 ? "-inf" : "nan");
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

}  // namespace

std::string report_text(const std::string& report_json) {
  const json j = json::parse(report_json);
  std::ostringstream out;
  const std::string command = j.value("command", "fit");
  out << command << " report: " << j.at("variant").get<std::string>() << '\n';
  if (j.contains("data")) {
    const auto& d = j["data"];
    out << "data: " << d.at("n_stimuli").get<long>() << " stimuli x "
        << d.at("n_responses").get<long>() << " responses, "
        << d.at("trials_per_stimulus").get<long>() << " trials per stimulus\n";
  }
  if (command == "fit") {
    out << "seed " << j.at("seed").get<std::uint64_t>() << ", " << j.at("restarts").get<int>()
        << " restarts, N_e " << j.at("n_e").get<long>() << '\n';
    int r = 1;
    for (const auto& rr : j.at("restart_results")) {
      out << "  restart " << r++ << ": log L " << fixed(rr.at("log_l"), 3)
          << (rr.at("optimisation_converged").get<bool>() && rr.at("sampling_converged").get<bool>()
                  ? ""
                  : " (not converged)")
          << ", " << rr.at("resets").get<long>() << " resets, "
          << rr.at("optimisation_proposals").get<long>() + rr.at("sampling_proposals").get<long>()
          << " proposals\n";
    }
    out << "selected restart " << j.at("selected_restart").get<long>() << '\n';
    out << "log L " << fixed(j.at("log_l"), 4) << " (with soft term "
        << fixed(j.at("log_l_soft"), 4) << ")\n";
    const auto& cons = j.at("consistency");
    out << "restart spread per dof " << fixed(cons.at("spread_per_dof"), 4)
        << " (dof " << j.at("dof").get<long>() << ")"
        << (cons.at("consistent").get<bool>() ? "" : " INCONSISTENT") << '\n';
    out << "\nparameter        value        lo        hi\n";
    for (const auto& p : j.at("parameters")) {
      std::string name = p.at("name").get<std::string>();
      name.resize(std::max<std::size_t>(name.size(), 10), ' ');
      out << "  " << name << ' ' << fixed(p.at("value"), 4);
      if (p.at("free").get<bool>()) {
        out << "  " << fixed(p.at("lo"), 4) << "  "
            << fixed(p.at("hi"), 4);
      } else {
        out << "  fixed";
      }
      out << '\n';
    }
  } else if (j.contains("log_l")) {
    out << "log L " << fixed(j.at("log_l"), 4) << " (with soft term "
        << fixed(j.at("log_l_soft"), 4) << ")\n";
  }
  const auto& g = j.at("gof");
  out << "\nRMSD " << fixed(g.at("rmsd"), 4) << "  r^2 "
      << fixed(g.at("r_squared"), 4) << '\n';
  out << "b0 " << fixed(g.at("b0"), 4) << " +/- "
      << fixed(g.at("b0_half_width"), 4) << "  b1 "
      << fixed(g.at("b1"), 4) << " +/- "
      << fixed(g.at("b1_half_width"), 4) << '\n';
  out << "KL " << fixed(g.at("kl_bits"), 4) << " bits (proportions floored at "
      << fixed(g.at("kl_floor"), 6) << ")\n";
  out << "fit " << j.at("quality").get<std::string>() << '\n';
  if (j.contains("recovery")) {
    const auto& rec = j["recovery"];
    out << "recovery: b " << fixed(rec.at("b"), 4) << ", "
        << rec.at("hits").get<long>() << " of " << rec.at("free_parameters").get<long>()
        << " inside limits, generating log L " << fixed(rec.at("log_l_generating"), 4)
        << '\n';
  }
  if (j.value("flagged", false)) out << "FLAGGED\n";
  return out.str();
}

bool report_flagged(const std::string& report_json) {
  return json::parse(report_json).value("flagged", false);
}

}  // namespace bmcmc
