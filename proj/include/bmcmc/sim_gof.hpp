// Pseudo-data simulation and goodness-of-fit indicators.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "bmcmc/chain.hpp"
#include "bmcmc/cj_models.hpp"
#include "bmcmc/drivers.hpp"
#include "bmcmc/rating_matrix.hpp"

namespace bmcmc {

/// Trial-by-trial rating experiment: each trial draws a signal sample and one
/// sample per criterion (the fixed means in the delta limits) and answers i
/// when criterion i is the smallest at or above the signal, M+1 otherwise.
RatingMatrix simulate_matrix(const CJParameters& params, ModelVariant variant,
                             std::int64_t trials_per_stimulus, Rng& rng);

/// The decision rule for one trial; returns a 0-based response index.
std::size_t decide(double signal_sample, std::span<const double> criterion_samples);

struct GofReport {
  double rmsd = 0.0;
  double r_squared = 0.0;
  double b0 = 0.0;
  double b0_half_width = 0.0;  ///< 95% confidence half-width
  double b1 = 0.0;
  double b1_half_width = 0.0;
  double kl_bits = 0.0;
  double kl_floor = 0.0;  ///< floor applied to observed proportions in the KL term
};

/// Compares observed proportions p with predicted probabilities P over all
/// N x (M+1) cells: RMSD, OLS regression of p on P (r^2, b0, b1 and their
/// 95% half-widths) and sum P log2(P / p) with p floored at 1 / (2 Tr N)
/// and each floored row renormalised.
/// `predicted` is row-major. Half-widths are infinite when there are fewer than
/// three cells or P is constant.
GofReport gof(const RatingMatrix& observed, std::span<const double> predicted);

enum class FitQuality { acceptable, marginal, unacceptable };

std::string_view to_string(FitQuality q);

/// Rough acceptability guides: RMSD < .025, b0 and b1 half-widths below
/// 0.0075 and 0.05, KL < 0.175. All met: acceptable. RMSD and KL met but a
/// coefficient width missed: marginal. Otherwise unacceptable.
FitQuality classify(const GofReport& report);

/// Least-squares b in recovered = b * generating. Throws
/// std::invalid_argument when the lengths differ or generating is all zero.
std::pair<double, std::vector<double>> rescale_generating(std::span<const double> recovered,
                                                          std::span<const double> generating);

struct Consistency {
  double spread_per_dof = 0.0;
  bool consistent = true;
};

inline constexpr double kConsistencyThreshold = 0.05;

/// |max - min| / dof across restart log-likelihoods.
Consistency consistency(std::span<const double> log_likelihoods, std::int64_t dof);

/// Degrees of freedom of a rating matrix: N * M.
std::int64_t rating_dof(const RatingMatrix& data);

/// Number of rescaled generating values inside the closed intervals.
std::size_t coverage_check(std::span<const double> recovered, std::span<const Interval> limits,
                           std::span<const double> rescaled_generating);

}  // namespace bmcmc
