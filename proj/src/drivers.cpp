#include "bmcmc/drivers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bmcmc {

void DriftTracker::clear() {
  accepted_since_sample = 0;
  sampled_points.clear();
  reversal_count = 0;
  comparisons = 0;
}

bool is_reversal(std::span<const double> d1, std::span<const double> d2) {
  double dot = 0.0;
  double n1 = 0.0;
  double n2 = 0.0;
  for (std::size_t k = 0; k < d1.size(); ++k) {
    dot += d1[k] * d2[k];
    n1 += d1[k] * d1[k];
    n2 += d2[k] * d2[k];
  }
  if (n1 == 0.0 || n2 == 0.0) return true;
  return dot < 0.0;
}

void detect_drift(DriftTracker& tracker, std::span<const double> accepted) {
  if (++tracker.accepted_since_sample < tracker.stride) return;
  tracker.accepted_since_sample = 0;
  tracker.sampled_points.emplace_back(accepted.begin(), accepted.end());
  if (tracker.sampled_points.size() > 3) tracker.sampled_points.erase(tracker.sampled_points.begin());
  if (tracker.sampled_points.size() < 3) return;

  const auto& a = tracker.sampled_points[0];
  const auto& b = tracker.sampled_points[1];
  const auto& c = tracker.sampled_points[2];
  std::vector<double> d1(a.size());
  std::vector<double> d2(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    d1[k] = b[k] - a[k];
    d2[k] = c[k] - b[k];
  }
  ++tracker.comparisons;
  if (is_reversal(d1, d2)) ++tracker.reversal_count;
}

long drift_threshold(const OptimisationConfig& config, std::size_t n_parameters) {
  if (config.drift_threshold > 0) return config.drift_threshold;
  return std::max<long>(10, static_cast<long>(n_parameters));
}

double exploration_budget(double exploration_constant, double lambda) {
  return exploration_constant / (lambda * lambda);
}

double ergodic_budget(double factor, std::size_t n_parameters, long n_e) {
  return factor * static_cast<double>(n_parameters) * static_cast<double>(n_e);
}

OptimisationResult run_optimisation(const ProblemDefinition& problem, std::span<const double> start,
                                    const ChainConfig& chain_config,
                                    const OptimisationConfig& config, Rng& rng,
                                    const TraceSink& trace) {
  OptimisationResult result;
  result.state = make_chain_state(problem, start, chain_config);
  ChainState& state = result.state;
  DriftTracker drift;
  drift.stride = config.drift_stride;
  const long threshold = drift_threshold(config, state.n_parameters());

  while (result.proposals < config.max_proposals) {
    const StepRecord record = step(state, problem, chain_config, rng);
    ++result.proposals;
    if (trace) trace(record);
    if (record.reset) drift.clear();
    if (!record.accepted) continue;
    detect_drift(drift, state.current.values);
    const bool no_drift = drift.reversal_count >= threshold;
    const bool explored =
        static_cast<double>(state.accepted_since_reset) >=
        exploration_budget(config.exploration_constant, state.bootstrap_scale.lambda);
    if (no_drift && explored) {
      result.converged = true;
      break;
    }
  }
  result.best = state.anneal.best_point;
  return result;
}

SamplingResult run_sampling(const ProblemDefinition& problem, ChainState state, long n_e,
                            const ChainConfig& chain_config, const SamplingConfig& config,
                            Rng& rng, const TraceSink& trace) {
  if (n_e < 1) throw std::invalid_argument("run_sampling: N_e must be positive");
  SamplingResult result;
  enter_sampling_mode(state);
  const double budget = ergodic_budget(config.ergodic_factor, state.n_parameters(), n_e);

  while (result.proposals < config.max_proposals) {
    const StepRecord record = step(state, problem, chain_config, rng);
    ++result.proposals;
    if (trace) trace(record);
    if (state.samples_since_reset >= n_e && state.lambda_inverse_square_sum >= budget) {
      result.converged = true;
      break;
    }
  }

  const auto& entries = state.archive.entries();
  const auto tail = static_cast<std::size_t>(
      std::min<long>(state.samples_since_reset, static_cast<long>(entries.size())));
  result.samples.assign(entries.end() - static_cast<std::ptrdiff_t>(tail), entries.end());
  result.best = state.anneal.best_point;
  result.state = std::move(state);
  return result;
}

double percentile_sorted(std::span<const double> sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 0) throw std::invalid_argument("percentile_sorted: no data");
  const double pos = q * static_cast<double>(n) + 0.5;  // 1-based
  if (pos <= 1.0) return sorted.front();
  if (pos >= static_cast<double>(n)) return sorted.back();
  const auto lower = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lower);
  return sorted[lower - 1] + frac * (sorted[lower] - sorted[lower - 1]);
}

std::vector<Interval> confidence_limits(std::span<const std::vector<double>> samples,
                                        double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("confidence_limits: level must lie in (0, 1)");
  }
  if (samples.size() < kMinimumSamplesForLimits) {
    throw std::invalid_argument("confidence_limits: " + std::to_string(samples.size()) +
                                " samples; run sampling longer (need at least " +
                                std::to_string(kMinimumSamplesForLimits) + ")");
  }
  const std::size_t dim = samples.front().size();
  std::vector<Interval> limits(dim);
  std::vector<double> column(samples.size());
  const double tail = 0.5 * (1.0 - level);
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t s = 0; s < samples.size(); ++s) column[s] = samples[s][k];
    std::sort(column.begin(), column.end());
    limits[k] = Interval{percentile_sorted(column, tail), percentile_sorted(column, 1.0 - tail)};
  }
  return limits;
}

}  // namespace bmcmc
