#include "bmcmc/sim_gof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace bmcmc {

std::size_t decide(double signal_sample, std::span<const double> criterion_samples) {
  std::size_t response = criterion_samples.size();
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < criterion_samples.size(); ++i) {
    const double c = criterion_samples[i];
    if (c >= signal_sample && c < nearest) {
      nearest = c;
      response = i;
    }
  }
  return response;
}

RatingMatrix simulate_matrix(const CJParameters& params, ModelVariant variant,
                             std::int64_t trials_per_stimulus, Rng& rng) {
  if (trials_per_stimulus < 1) throw std::invalid_argument("simulate_matrix: trials must be >= 1");
  const std::size_t n = params.n_stimuli();
  const std::size_t m = params.n_criteria();
  RatingMatrix out(n, m + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> criteria(m);
  const bool random_signal = variant != ModelVariant::csdt;
  const bool random_criteria = variant != ModelVariant::sdt;
  for (std::size_t h = 0; h < n; ++h) {
    for (std::int64_t t = 0; t < trials_per_stimulus; ++t) {
      const double s = random_signal
                           ? params.signal_means[h] + params.signal_sigmas[h] * normal(rng)
                           : params.signal_means[h];
      for (std::size_t i = 0; i < m; ++i) {
        criteria[i] = random_criteria
                          ? params.criterion_means[i] + params.criterion_sigmas[i] * normal(rng)
                          : params.criterion_means[i];
      }
      out.increment(h, decide(s, criteria));
    }
  }
  return out;
}

GofReport gof(const RatingMatrix& observed, std::span<const double> predicted) {
  const std::size_t n_cells = observed.n_stimuli() * observed.n_responses();
  if (predicted.size() != n_cells) {
    throw std::invalid_argument("gof: predicted has " + std::to_string(predicted.size()) +
                                " cells, observed " + std::to_string(n_cells));
  }
  if (n_cells == 0) throw std::invalid_argument("gof: no cells");
  const std::vector<double> p = observed.proportions();
  const double cells = static_cast<double>(n_cells);

  GofReport r;
  double sq = 0.0;
  for (std::size_t k = 0; k < n_cells; ++k) sq += (p[k] - predicted[k]) * (p[k] - predicted[k]);
  r.rmsd = std::sqrt(sq / cells);

  // regression of observed p on predicted P
  const double mean_x = std::accumulate(predicted.begin(), predicted.end(), 0.0) / cells;
  const double mean_y = std::accumulate(p.begin(), p.end(), 0.0) / cells;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < n_cells; ++k) {
    const double dx = predicted[k] - mean_x;
    const double dy = p[k] - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx > 0.0) {
    r.b1 = sxy / sxx;
    r.b0 = mean_y - r.b1 * mean_x;
    double sse = 0.0;
    for (std::size_t k = 0; k < n_cells; ++k) {
      const double e = p[k] - r.b0 - r.b1 * predicted[k];
      sse += e * e;
    }
    r.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
    if (n_cells > 2) {
      const double s2 = sse / (cells - 2.0);
      const boost::math::students_t dist(cells - 2.0);
      const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
      r.b1_half_width = t * std::sqrt(s2 / sxx);
      r.b0_half_width = t * std::sqrt(s2 * (1.0 / cells + mean_x * mean_x / sxx));
    } else {
      // no residual degrees of freedom
      r.b0_half_width = r.b1_half_width = std::numeric_limits<double>::infinity();
    }
  } else {
    r.b1 = 0.0;
    r.b0 = mean_y;
    r.r_squared = 0.0;
    r.b0_half_width = r.b1_half_width = std::numeric_limits<double>::infinity();
  }

  const auto trials = observed.trials_per_stimulus();
  r.kl_floor = trials > 0 ? 1.0 / (2.0 * static_cast<double>(trials) *
                                   static_cast<double>(observed.n_stimuli()))
                          : 0.0;
  // Floored proportions are renormalised per row so the divergence stays
  // non-negative.
  const std::size_t width = observed.n_responses();
  double kl = 0.0;
  for (std::size_t row = 0; row < n_cells; row += width) {
    double total = 0.0;
    for (std::size_t k = row; k < row + width; ++k) total += std::max(p[k], r.kl_floor);
    for (std::size_t k = row; k < row + width; ++k) {
      const double big_p = predicted[k];
      if (big_p <= 0.0) continue;
      kl += big_p * std::log2(big_p * total / std::max(p[k], r.kl_floor));
    }
  }
  r.kl_bits = kl;
  return r;
}

std::string_view to_string(FitQuality q) {
  switch (q) {
    case FitQuality::acceptable: return "acceptable";
    case FitQuality::marginal: return "marginal";
    case FitQuality::unacceptable: return "unacceptable";
  }
  return "?";
}

FitQuality classify(const GofReport& report) {
  const bool rmsd_ok = report.rmsd < 0.025;
  const bool kl_ok = report.kl_bits < 0.175;
  const bool widths_ok = report.b0_half_width < 0.0075 && report.b1_half_width < 0.05;
  if (rmsd_ok && kl_ok && widths_ok) return FitQuality::acceptable;
  if (rmsd_ok && kl_ok) return FitQuality::marginal;
  return FitQuality::unacceptable;
}

std::pair<double, std::vector<double>> rescale_generating(std::span<const double> recovered,
                                                          std::span<const double> generating) {
  if (recovered.size() != generating.size() || generating.empty()) {
    throw std::invalid_argument("rescale_generating: vectors must have equal nonzero length");
  }
  double rg = 0.0;
  double gg = 0.0;
  for (std::size_t k = 0; k < generating.size(); ++k) {
    rg += recovered[k] * generating[k];
    gg += generating[k] * generating[k];
  }
  if (gg == 0.0) throw std::invalid_argument("rescale_generating: generating values are all zero");
  const double b = rg / gg;
  std::vector<double> rescaled(generating.size());
  for (std::size_t k = 0; k < generating.size(); ++k) rescaled[k] = b * generating[k];
  return {b, rescaled};
}

Consistency consistency(std::span<const double> log_likelihoods, std::int64_t dof) {
  if (dof <= 0) throw std::invalid_argument("consistency: dof must be positive");
  if (log_likelihoods.empty()) return {};
  const auto [lo, hi] = std::minmax_element(log_likelihoods.begin(), log_likelihoods.end());
  Consistency c;
  c.spread_per_dof = std::abs(*hi - *lo) / static_cast<double>(dof);
  c.consistent = c.spread_per_dof < kConsistencyThreshold;
  return c;
}

std::int64_t rating_dof(const RatingMatrix& data) {
  return static_cast<std::int64_t>(data.n_stimuli() * (data.n_responses() - 1));
}

std::size_t coverage_check(std::span<const double> recovered, std::span<const Interval> limits,
                           std::span<const double> rescaled_generating) {
  if (recovered.size() != limits.size() || limits.size() != rescaled_generating.size()) {
    throw std::invalid_argument("coverage_check: length mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t k = 0; k < limits.size(); ++k) {
    if (rescaled_generating[k] >= limits[k].lo && rescaled_generating[k] <= limits[k].hi) ++hits;
  }
  return hits;
}

}  // namespace bmcmc
