// Optimisation and sampling run modes built on the chain engine.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bmcmc/chain.hpp"

namespace bmcmc {

/// Detects systematic drift: every `stride` accepted steps the current
/// vector is sampled, and a reversal is counted whenever two successive
/// difference vectors meet at more than a right angle.
struct DriftTracker {
  long stride = 24;
  long accepted_since_sample = 0;
  std::vector<std::vector<double>> sampled_points;  ///< at most the last three
  long reversal_count = 0;
  long comparisons = 0;

  void clear();
};

/// Feeds one accepted vector. Zero-length difference vectors count as
/// reversals.
void detect_drift(DriftTracker& tracker, std::span<const double> accepted);

/// True when d1 and d2 meet at an angle above pi/2 (d1 . d2 < 0), or either
/// is zero.
bool is_reversal(std::span<const double> d1, std::span<const double> d2);

using TraceSink = std::function<void(const StepRecord&)>;

struct OptimisationConfig {
  long drift_stride = 24;
  long drift_threshold = 0;  ///< 0 means max(10, N_p)
  double exploration_constant = 3.0;
  long max_proposals = 1'000'000;
};

struct SamplingConfig {
  double ergodic_factor = 1.4;  ///< budget is factor * N_p * N_e
  long max_proposals = 10'000'000;
};

struct OptimisationResult {
  ParameterPoint best;
  ChainState state;
  bool converged = false;
  long proposals = 0;
};

struct SamplingResult {
  std::vector<ParameterPoint> samples;
  ParameterPoint best;
  ChainState state;
  bool converged = false;
  long proposals = 0;
};

long drift_threshold(const OptimisationConfig& config, std::size_t n_parameters);

/// Accepted steps needed since the last reset: C_opt / lambda^2.
double exploration_budget(double exploration_constant, double lambda);

/// Sum of 1/lambda^2 needed before sampling may stop: factor * N_p * N_e.
double ergodic_budget(double factor, std::size_t n_parameters, long n_e);

/// Anneals from `start` until no drift is detected and the exploration
/// budget is met since the last reset. On hitting the proposal cap the best
/// point so far is returned with converged = false.
OptimisationResult run_optimisation(const ProblemDefinition& problem, std::span<const double> start,
                                    const ChainConfig& chain_config,
                                    const OptimisationConfig& config, Rng& rng,
                                    const TraceSink& trace = {});

/// Samples at unit temperature, continuing an existing chain (normally the
/// state left by run_optimisation). Stops once at least n_e samples have been
/// archived since the last reset and the 1/lambda^2 budget is met. Returns
/// the post-reset tail of the archive.
SamplingResult run_sampling(const ProblemDefinition& problem, ChainState state, long n_e,
                            const ChainConfig& chain_config, const SamplingConfig& config,
                            Rng& rng, const TraceSink& trace = {});

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile of sorted data, linearly interpolated with the order
/// statistic x_(k) placed at probability (k - 0.5) / n.
double percentile_sorted(std::span<const double> sorted, double q);

/// Per-parameter central interval at `level` from sample vectors. Throws
/// std::invalid_argument below 100 samples or for level outside (0, 1).
std::vector<Interval> confidence_limits(std::span<const std::vector<double>> samples,
                                        double level);

inline constexpr std::size_t kMinimumSamplesForLimits = 100;

}  // namespace bmcmc
