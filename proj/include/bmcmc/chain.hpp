// Bootstrap MCMC stepping engine.
//
// Candidate steps are scaled differences of two archived states (90% of
// steps once the archive is large enough) or diagonal Gaussian draws (the
// rest, and all of start-up). Step scales are tuned toward a 1/4 acceptance
// rate with a significance test that tightens as the chain ages, and a new
// maximum that beats the old one by half the temperature partially resets
// the chain.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "bmcmc/problem.hpp"

namespace bmcmc {

using Rng = std::mt19937_64;

/// A canonical parameter vector with its log-density.
struct ParameterPoint {
  std::vector<double> values;
  double log_density = 0.0;
};

/// Accepted chain states in insertion order, with running per-parameter
/// moments for the adaptive Gaussian generator.
class Archive {
 public:
  Archive() = default;
  explicit Archive(std::size_t dimension) : dimension_(dimension) {}

  void push(ParameterPoint point);

  /// Keeps the `keep` entries with the largest log-density, in their
  /// original order.
  void keep_best(std::size_t keep);
  /// Keeps the `keep` newest entries.
  void keep_newest(std::size_t keep);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const ParameterPoint& operator[](std::size_t k) const { return entries_[k]; }
  const std::deque<ParameterPoint>& entries() const noexcept { return entries_; }
  double min_log_density() const;

  /// Per-parameter standard deviation (population form). Zero below two
  /// entries.
  std::vector<double> standard_deviations() const;

 private:
  void rebuild_moments();

  std::size_t dimension_ = 0;
  std::deque<ParameterPoint> entries_;
  std::vector<double> shift_;
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
};

/// Acceptance-controlled multiplier for one step generator.
struct StepScale {
  double lambda = 1.0;
  long t_lambda = 32;  ///< proposals per tracking window
  double f_lambda = 0.0;  ///< acceptance fraction of the last completed window
  long adjustments_made = 0;
  long window_trials = 0;
  long window_accepts = 0;
};

struct AnnealState {
  double temperature = 1.0;
  double target_temperature = 1.0;
  double best_log_density = 0.0;
  ParameterPoint best_point;
  long greedy_steps_remaining = 0;
};

enum class ChainMode { optimisation, sampling };

enum class Generator { bootstrap, prespecified };

std::string_view to_string(Generator g);

/// How the adaptive Gaussian generator turns the archive spread into widths.
enum class PrespecifiedWidth {
  sqrt_sd,  ///< width proportional to sqrt of per-parameter standard deviation
  sd,       ///< width proportional to the standard deviation itself
};

std::string_view to_string(PrespecifiedWidth w);

/// Engine constants. Defaults are the values shipped with the CLI.
struct ChainConfig {
  double initial_temperature = 10.0;
  double target_temperature = 1.0;
  double anneal_decay = 0.98;
  double reset_temperature_factor = 1.25;
  double reset_tolerance = 0.5;  ///< in units of the current temperature

  double bootstrap_fraction = 0.9;
  double target_acceptance = 0.25;
  double lambda_initial = 1.0;
  double lambda_factor = 1.5;
  long t_lambda_initial = 32;
  double t_lambda_growth = 1.3;
  long t_lambda_floor = 32;

  double archive_keep_fraction = 0.5;
  PrespecifiedWidth prespecified_width = PrespecifiedWidth::sqrt_sd;

  /// Widths of the start-up Gaussian generator, one per parameter. Empty
  /// means 0.5 for every parameter.
  std::vector<double> v_star;

  /// Entries needed before bootstrap steps start: 2 * N_p + 4.
  static std::size_t bootstrap_minimum(std::size_t n_parameters) { return 2 * n_parameters + 4; }
};

/// Everything a chain carries between steps.
struct ChainState {
  ChainMode mode = ChainMode::optimisation;
  ParameterPoint current;
  Archive archive;
  StepScale bootstrap_scale;
  StepScale prespecified_scale;
  AnnealState anneal;
  double initial_temperature = 10.0;

  long iterations = 0;
  long iterations_since_reset = 0;
  long accepted_since_reset = 0;
  long samples_since_reset = 0;
  long resets = 0;
  long uncomputable = 0;
  double lambda_inverse_square_sum = 0.0;

  std::size_t n_parameters() const noexcept { return current.values.size(); }
};

/// Outcome of one proposal, also the row format of the diagnostic trace.
struct StepRecord {
  long iteration = 0;
  double log_density = 0.0;
  double lambda = 1.0;
  double temperature = 1.0;
  bool accepted = false;
  bool reset = false;
  Generator generator = Generator::prespecified;
};

/// lambda * (a - b) for two distinct uniformly chosen archive entries.
/// Throws std::logic_error when the archive holds fewer than two entries.
std::vector<double> propose_bootstrap(const Archive& archive, const StepScale& scale, Rng& rng);

/// Diagonal Gaussian step. Below `bootstrap_minimum` entries the widths are
/// `v_star` times scale.lambda; afterwards each width is the archive spread
/// (see PrespecifiedWidth) times scale.lambda, falling back to v_star on axes
/// with zero spread.
std::vector<double> propose_prespecified(const StepScale& scale, const Archive& archive,
                                         std::span<const double> v_star,
                                         std::size_t bootstrap_minimum, PrespecifiedWidth mode,
                                         Rng& rng);

Generator select_generator(Rng& rng, const Archive& archive, std::size_t bootstrap_minimum,
                           double bootstrap_fraction = 0.9);

/// Metropolis rule at temperature T: accept when the log-density does not
/// drop, otherwise with probability exp(D / T). Uncomputable candidates are
/// always rejected.
bool metropolis_accept(double current_log_density, std::optional<double> candidate_log_density,
                       double temperature, Rng& rng);

/// Significance level for changing a step scale after `iterations` steps
/// since the last reset: min(0.5, 5 / sqrt(i + 25)).
double adaptation_significance(long iterations_since_reset);

/// Two-sided exact binomial p-value for `successes` out of `trials` at rate p.
double binomial_two_sided_p(long successes, long trials, double p);

/// Feeds one proposal outcome into the scale's tracking window. When the
/// window is full its acceptance count is tested against the target rate;
/// a significant excess multiplies lambda up, a deficit divides it down, and
/// a window with no adjustment lengthens t_lambda.
void record_acceptance(StepScale& scale, bool accepted, long iterations_since_reset,
                       const ChainConfig& config);

/// T <- T_target + (T - T_target) * decay on an accepted step.
void anneal_step(AnnealState& anneal, bool accepted, double decay);

/// Tracks the best point and partially resets the chain when
/// `new_point.log_density` beats the best by more than the tolerance.
/// Returns true when a reset was performed.
bool maybe_reset(ChainState& state, const ParameterPoint& new_point, const ChainConfig& config);

/// Builds the initial state from an evaluated start point. Throws
/// std::invalid_argument if the start is uncomputable.
ChainState make_chain_state(const ProblemDefinition& problem, std::span<const double> start,
                            const ChainConfig& config);

/// Switches to sampling: temperature pinned at 1, counters since reset
/// cleared, greedy restarts cancelled.
void enter_sampling_mode(ChainState& state);

/// One proposal, evaluation, accept/reject and bookkeeping step.
StepRecord step(ChainState& state, const ProblemDefinition& problem, const ChainConfig& config,
                Rng& rng);

}  // namespace bmcmc
