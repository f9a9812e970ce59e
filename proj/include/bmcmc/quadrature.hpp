// Gaussian primitives and Romberg integration.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bmcmc::quad {

/// A univariate Gaussian on the decision continuum. sigma must be positive.
struct GaussianSpec {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Number of standard deviations kept when an infinite limit is truncated.
inline constexpr double kTruncationRadius = 8.0;

double phi(double x, const GaussianSpec& g);

/// Lower-tail probability P(X <= x).
double Phi(double x, const GaussianSpec& g);

/// Upper-tail probability P(X > x), accurate far into the tail.
double Phi_upper(double x, const GaussianSpec& g);

/// P(a < X <= b) without cancellation in either tail.
double interval_mass(double a, double b, const GaussianSpec& g);

struct RombergOptions {
  double rel_tol = 1e-6;
  double abs_tol = 1e-12;
  int max_levels = 20;
  /// Convergence is not tested before this level; guards against coarse
  /// grids that step over a narrow feature entirely.
  int min_levels = 4;
};

/// Raised when the extrapolation table fails to settle within the level cap.
class RombergError : public std::runtime_error {
 public:
  RombergError(double best_estimate, double gap)
      : std::runtime_error("Romberg integration did not converge (estimate " +
                           std::to_string(best_estimate) + ", gap " +
                           std::to_string(gap) + ")"),
        best_estimate_(best_estimate),
        gap_(gap) {}

  double best_estimate() const noexcept { return best_estimate_; }
  double gap() const noexcept { return gap_; }

 private:
  double best_estimate_;
  double gap_;
};

/// Richardson extrapolation over a sequence of trapezoid estimates whose
/// step halves at every level. Works on vectors so several integrals that
/// share one grid can be extrapolated together.
class RichardsonTable {
 public:
  explicit RichardsonTable(std::size_t width) : width_(width) {}

  /// Adds the trapezoid estimates of the next level and returns the newest
  /// diagonal entry.
  std::span<const double> push(std::span<const double> trapezoid);

  /// Largest |diag_k - diag_{k-1}| minus its tolerance; <= 0 means every
  /// component has converged. Infinite until two levels exist.
  double excess(double rel_tol, double abs_tol) const;

  /// Largest absolute change between the last two diagonal entries.
  double gap() const;

  std::span<const double> estimate() const { return diag_; }

  int levels() const noexcept { return levels_; }

 private:
  std::size_t width_;
  int levels_ = 0;
  std::vector<double> row_;  // levels_ x width_, last row of the table
  std::vector<double> diag_;
  std::vector<double> previous_diag_;
};

/// Romberg integration of f over [a, b].
template <class F>
double romberg(F&& f, double a, double b, const RombergOptions& opt = {}) {
  if (!(a <= b)) throw std::invalid_argument("romberg: requires a <= b");
  if (a == b) return 0.0;
  RichardsonTable table(1);
  const double width = b - a;
  double sum = 0.5 * (f(a) + f(b));
  long intervals = 1;
  for (int level = 0; level <= opt.max_levels; ++level) {
    if (level > 0) {
      const double h = width / static_cast<double>(intervals * 2);
      for (long k = 1; k < intervals * 2; k += 2) sum += f(a + h * static_cast<double>(k));
      intervals *= 2;
    }
    const double trapezoid = sum * width / static_cast<double>(intervals);
    const double diag = table.push(std::span<const double>(&trapezoid, 1))[0];
    if (level >= opt.min_levels && table.excess(opt.rel_tol, opt.abs_tol) <= 0.0) return diag;
  }
  throw RombergError(table.estimate()[0], table.gap());
}

/// Replaces infinite ends of [lo, hi] by the envelope mu -/+ 8 sigma of the
/// supplied densities.
std::pair<double, double> truncate_infinite(double lo, double hi,
                                            std::span<const GaussianSpec> relevant);

/// A composite grid: [breaks[p], breaks[p+1]] is divided into
/// base[p] * 2^level equal intervals. Halving every panel together keeps the
/// trapezoid error expansion in even powers of one step parameter, so the
/// level sequence can be Richardson-extrapolated.
struct PanelGrid {
  std::vector<double> breaks;
  std::vector<int> base;

  std::size_t intervals(int level) const;
  /// Node abscissae at `level`, ascending, endpoints included.
  std::vector<double> nodes(int level) const;
};

/// Builds panels over [lo, hi] resolving every density in `features`.
/// Densities narrower than the window / `narrow_ratio` receive breakpoints at
/// mu + sigma * {0, ±1, ±2, ±4, ±8}; each panel starts with about one interval
/// per smallest standard deviation overlapping it.
PanelGrid make_panel_grid(double lo, double hi, std::span<const GaussianSpec> features,
                          double narrow_ratio = 32.0, int max_base = 256);

/// Trapezoid weights for ascending nodes.
void trapezoid_weights(std::span<const double> x, std::span<double> w);

}  // namespace bmcmc::quad
