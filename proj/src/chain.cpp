#include "bmcmc/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/binomial.hpp>

namespace bmcmc {

void Archive::push(ParameterPoint point) {
  if (dimension_ == 0) dimension_ = point.values.size();
  if (point.values.size() != dimension_) throw std::invalid_argument("Archive: dimension mismatch");
  if (entries_.empty()) {
    shift_ = point.values;
    sum_.assign(dimension_, 0.0);
    sum_sq_.assign(dimension_, 0.0);
  }
  for (std::size_t k = 0; k < dimension_; ++k) {
    const double d = point.values[k] - shift_[k];
    sum_[k] += d;
    sum_sq_[k] += d * d;
  }
  entries_.push_back(std::move(point));
}

void Archive::keep_best(std::size_t keep) {
  if (keep >= entries_.size()) return;
  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return entries_[a].log_density > entries_[b].log_density;
  });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  std::deque<ParameterPoint> kept;
  for (std::size_t k : order) kept.push_back(std::move(entries_[k]));
  entries_ = std::move(kept);
  rebuild_moments();
}

void Archive::keep_newest(std::size_t keep) {
  if (keep >= entries_.size()) return;
  entries_.erase(entries_.begin(), entries_.end() - static_cast<std::ptrdiff_t>(keep));
  rebuild_moments();
}

double Archive::min_log_density() const {
  if (entries_.empty()) throw std::logic_error("Archive: empty");
  double m = entries_.front().log_density;
  for (const auto& e : entries_) m = std::min(m, e.log_density);
  return m;
}

std::vector<double> Archive::standard_deviations() const {
  std::vector<double> sd(dimension_, 0.0);
  const double n = static_cast<double>(entries_.size());
  if (entries_.size() < 2) return sd;
  for (std::size_t k = 0; k < dimension_; ++k) {
    const double mean = sum_[k] / n;
    sd[k] = std::sqrt(std::max(0.0, sum_sq_[k] / n - mean * mean));
  }
  return sd;
}

void Archive::rebuild_moments() {
  std::deque<ParameterPoint> entries = std::move(entries_);
  entries_.clear();
  for (auto& e : entries) push(std::move(e));
}

std::string_view to_string(Generator g) {
  return g == Generator::bootstrap ? "bootstrap" : "prespecified";
}

std::string_view to_string(PrespecifiedWidth w) {
  return w == PrespecifiedWidth::sqrt_sd ? "sqrt_sd" : "sd";
}

std::vector<double> propose_bootstrap(const Archive& archive, const StepScale& scale, Rng& rng) {
  const std::size_t n = archive.size();
  if (n < 2) throw std::logic_error("propose_bootstrap: archive needs at least two entries");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t a = pick(rng);
  std::size_t b = pick(rng);
  while (b == a) b = pick(rng);
  const auto& va = archive[a].values;
  const auto& vb = archive[b].values;
  std::vector<double> step(va.size());
  for (std::size_t k = 0; k < va.size(); ++k) step[k] = scale.lambda * (va[k] - vb[k]);
  return step;
}

std::vector<double> propose_prespecified(const StepScale& scale, const Archive& archive,
                                         std::span<const double> v_star,
                                         std::size_t bootstrap_minimum, PrespecifiedWidth mode,
                                         Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> step(v_star.size());
  if (archive.size() < bootstrap_minimum) {
    for (std::size_t k = 0; k < step.size(); ++k) step[k] = scale.lambda * v_star[k] * normal(rng);
    return step;
  }
  const std::vector<double> sd = archive.standard_deviations();
  for (std::size_t k = 0; k < step.size(); ++k) {
    double width = v_star[k];
    if (sd[k] > 0.0) {
      width = scale.lambda * (mode == PrespecifiedWidth::sqrt_sd ? std::sqrt(sd[k]) : sd[k]);
    }
    step[k] = width * normal(rng);
  }
  return step;
}

Generator select_generator(Rng& rng, const Archive& archive, std::size_t bootstrap_minimum,
                           double bootstrap_fraction) {
  if (archive.size() < bootstrap_minimum) return Generator::prespecified;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < bootstrap_fraction ? Generator::bootstrap : Generator::prespecified;
}

bool metropolis_accept(double current_log_density, std::optional<double> candidate_log_density,
                       double temperature, Rng& rng) {
  if (!candidate_log_density) return false;
  const double d = *candidate_log_density - current_log_density;
  if (d >= 0.0) return true;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < std::exp(d / temperature);
}

double adaptation_significance(long iterations_since_reset) {
  return std::min(0.5, 5.0 / std::sqrt(static_cast<double>(iterations_since_reset) + 25.0));
}

double binomial_two_sided_p(long successes, long trials, double p) {
  if (trials <= 0) return 1.0;
  const boost::math::binomial_distribution<double> dist(static_cast<double>(trials), p);
  const double k = static_cast<double>(successes);
  const double lower = boost::math::cdf(dist, k);
  const double upper = successes == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, k - 1.0));
  return std::min(1.0, 2.0 * std::min(lower, upper));
}

void record_acceptance(StepScale& scale, bool accepted, long iterations_since_reset,
                       const ChainConfig& config) {
  ++scale.window_trials;
  if (accepted) ++scale.window_accepts;
  if (scale.window_trials < scale.t_lambda) return;

  scale.f_lambda = static_cast<double>(scale.window_accepts) / static_cast<double>(scale.window_trials);
  const double p_value =
      binomial_two_sided_p(scale.window_accepts, scale.window_trials, config.target_acceptance);
  if (p_value < adaptation_significance(iterations_since_reset)) {
    if (scale.f_lambda > config.target_acceptance) {
      scale.lambda *= config.lambda_factor;
    } else {
      scale.lambda /= config.lambda_factor;
    }
    ++scale.adjustments_made;
  } else {
    scale.t_lambda = static_cast<long>(std::ceil(static_cast<double>(scale.t_lambda) * config.t_lambda_growth));
  }
  scale.window_trials = 0;
  scale.window_accepts = 0;
}

void anneal_step(AnnealState& anneal, bool accepted, double decay) {
  if (!accepted) return;
  anneal.temperature =
      anneal.target_temperature + (anneal.temperature - anneal.target_temperature) * decay;
  anneal.temperature = std::max(anneal.temperature, anneal.target_temperature);
}

namespace {

void shorten_window(StepScale& scale, const ChainConfig& config) {
  scale.window_trials = 0;
  scale.window_accepts = 0;
  scale.t_lambda = std::max(config.t_lambda_floor, scale.t_lambda / 2);
}

}  // namespace

bool maybe_reset(ChainState& state, const ParameterPoint& new_point, const ChainConfig& config) {
  AnnealState& anneal = state.anneal;
  const bool reset = new_point.log_density >
                     anneal.best_log_density + config.reset_tolerance * anneal.temperature;
  if (new_point.log_density > anneal.best_log_density) {
    anneal.best_log_density = new_point.log_density;
    anneal.best_point = new_point;
  }
  if (!reset) return false;

  const std::size_t n_p = state.n_parameters();
  const std::size_t minimum = ChainConfig::bootstrap_minimum(n_p);
  const std::size_t n = state.archive.size();
  const auto fraction_kept =
      static_cast<std::size_t>(std::ceil(config.archive_keep_fraction * static_cast<double>(n)));
  const std::size_t keep = std::max(fraction_kept, std::min(n, minimum));
  if (state.mode == ChainMode::optimisation) {
    anneal.temperature = std::min(anneal.temperature * config.reset_temperature_factor,
                                  state.initial_temperature);
    anneal.temperature = std::max(anneal.temperature, anneal.target_temperature);
    state.archive.keep_best(keep);
  } else {
    state.archive.keep_newest(keep);
  }

  state.iterations_since_reset = 0;
  state.accepted_since_reset = 0;
  state.samples_since_reset = 0;
  state.lambda_inverse_square_sum = 0.0;
  shorten_window(state.bootstrap_scale, config);
  shorten_window(state.prespecified_scale, config);
  anneal.greedy_steps_remaining = static_cast<long>(2 * n_p);
  ++state.resets;
  return true;
}

ChainState make_chain_state(const ProblemDefinition& problem, std::span<const double> start,
                            const ChainConfig& config) {
  Evaluation e = evaluate(problem, start);
  if (!e.computable()) throw std::invalid_argument("chain start point is uncomputable");
  ChainState state;
  state.current = ParameterPoint{std::move(e.canonical), *e.log_density};
  state.archive = Archive(state.current.values.size());
  state.archive.push(state.current);
  state.bootstrap_scale.lambda = config.lambda_initial;
  state.bootstrap_scale.t_lambda = config.t_lambda_initial;
  state.prespecified_scale.lambda = config.lambda_initial;
  state.prespecified_scale.t_lambda = config.t_lambda_initial;
  state.initial_temperature = std::max(config.initial_temperature, config.target_temperature);
  state.anneal.temperature = state.initial_temperature;
  state.anneal.target_temperature = config.target_temperature;
  state.anneal.best_log_density = state.current.log_density;
  state.anneal.best_point = state.current;
  return state;
}

void enter_sampling_mode(ChainState& state) {
  state.mode = ChainMode::sampling;
  state.anneal.temperature = 1.0;
  state.anneal.target_temperature = 1.0;
  state.anneal.greedy_steps_remaining = 0;
  state.iterations_since_reset = 0;
  state.accepted_since_reset = 0;
  state.samples_since_reset = 0;
  state.lambda_inverse_square_sum = 0.0;
}

StepRecord step(ChainState& state, const ProblemDefinition& problem, const ChainConfig& config,
                Rng& rng) {
  const std::size_t n_p = state.n_parameters();
  const std::size_t minimum = ChainConfig::bootstrap_minimum(n_p);
  std::vector<double> v_star = config.v_star;
  if (v_star.empty()) v_star.assign(n_p, 0.5);
  if (v_star.size() != n_p) throw std::invalid_argument("step: v_star has the wrong length");

  ++state.iterations;
  ++state.iterations_since_reset;

  if (state.anneal.greedy_steps_remaining > 0) state.current = state.anneal.best_point;

  const Generator generator =
      select_generator(rng, state.archive, minimum, config.bootstrap_fraction);
  std::vector<double> delta =
      generator == Generator::bootstrap
          ? propose_bootstrap(state.archive, state.bootstrap_scale, rng)
          : propose_prespecified(state.prespecified_scale, state.archive, v_star, minimum,
                                 config.prespecified_width, rng);
  for (std::size_t k = 0; k < n_p; ++k) delta[k] += state.current.values[k];

  const Evaluation candidate = evaluate(problem, delta);
  if (!candidate.computable()) ++state.uncomputable;
  const bool accepted = metropolis_accept(state.current.log_density, candidate.log_density,
                                          state.anneal.temperature, rng);

  if (generator == Generator::bootstrap) {
    record_acceptance(state.bootstrap_scale, accepted, state.iterations_since_reset, config);
  } else {
    record_acceptance(state.prespecified_scale, accepted, state.iterations_since_reset, config);
  }

  bool reset = false;
  if (accepted) {
    state.current = ParameterPoint{candidate.canonical, *candidate.log_density};
    ++state.accepted_since_reset;
    const double lambda = state.bootstrap_scale.lambda;
    state.lambda_inverse_square_sum += 1.0 / (lambda * lambda);
    if (state.anneal.greedy_steps_remaining > 0) --state.anneal.greedy_steps_remaining;
    if (state.mode == ChainMode::optimisation) {
      state.archive.push(state.current);
      anneal_step(state.anneal, true, config.anneal_decay);
    }
    reset = maybe_reset(state, state.current, config);
  }
  if (state.mode == ChainMode::sampling) {
    state.archive.push(state.current);
    ++state.samples_since_reset;
  }

  return StepRecord{state.iterations,       state.current.log_density,
                    state.bootstrap_scale.lambda, state.anneal.temperature,
                    accepted,               reset,
                    generator};
}

}  // namespace bmcmc
