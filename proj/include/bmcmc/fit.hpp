// Multi-restart fitting of rating data and the fit report.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bmcmc/chain.hpp"
#include "bmcmc/cj_models.hpp"
#include "bmcmc/drivers.hpp"
#include "bmcmc/rating_matrix.hpp"
#include "bmcmc/sim_gof.hpp"

namespace bmcmc {

struct FitConfig {
  ModelVariant variant = ModelVariant::fsdt;
  int restarts = 3;
  long n_e = 4000;
  std::uint64_t seed = 1;
  /// Threads running restarts; 0 picks min(restarts, hardware threads).
  int workers = 0;
  /// Multiplicative half-range of the uniform start perturbation.
  double jitter = 0.2;
  double confidence_level = 0.95;
  /// Samples (evenly thinned) used for limits on predicted probabilities.
  long predicted_samples = 1000;
  bool keep_trace = false;

  ChainConfig chain;
  OptimisationConfig optimisation;
  SamplingConfig sampling;
  LikelihoodOptions likelihood;
};

/// Throws std::invalid_argument when a field is out of range.
void validate(const FitConfig& config);

struct RestartResult {
  std::uint64_t seed = 0;
  std::vector<double> start;  ///< canonical free values
  ParameterPoint best;        ///< log_density includes the soft term
  double log_l = 0.0;         ///< excluding the soft term
  double log_l_soft = 0.0;    ///< including it
  bool optimisation_converged = false;
  bool sampling_converged = false;
  long optimisation_proposals = 0;
  long sampling_proposals = 0;
  long resets = 0;
  long uncomputable = 0;
  std::vector<ParameterPoint> samples;
  std::vector<StepRecord> trace;

  bool converged() const { return optimisation_converged && sampling_converged; }
};

struct FitResult {
  FitConfig config;
  RatingMatrix data;
  CJParameters parameter_template;
  std::vector<RestartResult> restarts;
  std::size_t selected = 0;

  CJParameters best;
  std::vector<std::size_t> free_index;  ///< flat index of each free entry
  std::vector<Interval> limits;         ///< per flat entry; fixed ones collapse to the value
  std::vector<double> predicted;        ///< row-major N x (M+1)
  std::vector<Interval> predicted_limits;

  double log_l = 0.0;
  double log_l_soft = 0.0;
  std::int64_t dof = 0;
  Consistency consistency;
  GofReport gof;
  FitQuality quality = FitQuality::unacceptable;
  bool converged = false;  ///< at least one restart converged
  bool flagged = false;
};

/// Runs `restarts` independent optimise-then-sample chains from jittered
/// template values (restart r uses seed + r) and keeps the one with the
/// highest log-likelihood excluding the soft term.
FitResult run_fit(const RatingMatrix& data, const CJParameters& parameter_template,
                  const FitConfig& config);

struct Recovery {
  double b = 0.0;
  std::vector<std::size_t> free_index;
  std::vector<double> generating;  ///< canonicalised, free entries
  std::vector<double> rescaled;
  std::vector<double> recovered;
  std::vector<Interval> limits;
  std::size_t hits = 0;
  double log_l_generating = 0.0;
};

/// Compares a fit with the parameters that generated its data.
Recovery compare_recovery(const FitResult& fit, const CJParameters& generating);

/// Machine-readable report; `report_text` renders it for people.
std::string fit_report_json(const FitResult& fit, const std::optional<Recovery>& recovery);
std::string report_text(const std::string& report_json);
/// Whether a JSON report is flagged.
bool report_flagged(const std::string& report_json);

}  // namespace bmcmc
