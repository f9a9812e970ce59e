#include "bmcmc/quadrature.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace bmcmc::quad {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}

double phi(double x, const GaussianSpec& g) {
  const double z = (x - g.mu) / g.sigma;
  return kInvSqrt2Pi / g.sigma * std::exp(-0.5 * z * z);
}

double Phi(double x, const GaussianSpec& g) {
  const double z = (x - g.mu) / g.sigma;
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double Phi_upper(double x, const GaussianSpec& g) {
  const double z = (x - g.mu) / g.sigma;
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

double interval_mass(double a, double b, const GaussianSpec& g) {
  if (!(a < b)) return 0.0;
  // Subtract the two smaller tail areas.
  if (a >= g.mu) return Phi_upper(a, g) - Phi_upper(b, g);
  if (b <= g.mu) return Phi(b, g) - Phi(a, g);
  return 1.0 - Phi(a, g) - Phi_upper(b, g);
}

std::span<const double> RichardsonTable::push(std::span<const double> trapezoid) {
  if (trapezoid.size() != width_) throw std::invalid_argument("RichardsonTable: width mismatch");
  std::vector<double> row(static_cast<std::size_t>(levels_ + 1) * width_);
  std::copy(trapezoid.begin(), trapezoid.end(), row.begin());
  double factor = 1.0;
  for (int j = 1; j <= levels_; ++j) {
    factor *= 4.0;
    for (std::size_t c = 0; c < width_; ++c) {
      const double fine = row[(j - 1) * width_ + c];
      const double coarse = row_[(j - 1) * width_ + c];
      row[j * width_ + c] = fine + (fine - coarse) / (factor - 1.0);
    }
  }
  row_ = std::move(row);
  previous_diag_ = std::move(diag_);
  diag_.assign(row_.end() - static_cast<std::ptrdiff_t>(width_), row_.end());
  ++levels_;
  return diag_;
}

double RichardsonTable::excess(double rel_tol, double abs_tol) const {
  if (levels_ < 2) return std::numeric_limits<double>::infinity();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < width_; ++c) {
    const double diff = std::abs(diag_[c] - previous_diag_[c]);
    const double tol = std::max(rel_tol * std::abs(diag_[c]), abs_tol);
    if (!std::isfinite(diff)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, diff - tol);
  }
  return worst;
}

double RichardsonTable::gap() const {
  if (levels_ < 2) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t c = 0; c < width_; ++c) worst = std::max(worst, std::abs(diag_[c] - previous_diag_[c]));
  return worst;
}

std::pair<double, double> truncate_infinite(double lo, double hi,
                                            std::span<const GaussianSpec> relevant) {
  if (relevant.empty()) throw std::invalid_argument("truncate_infinite: no densities supplied");
  if (std::isinf(lo) && lo < 0) {
    lo = std::numeric_limits<double>::infinity();
    for (const auto& g : relevant) lo = std::min(lo, g.mu - kTruncationRadius * g.sigma);
  }
  if (std::isinf(hi) && hi > 0) {
    hi = -std::numeric_limits<double>::infinity();
    for (const auto& g : relevant) hi = std::max(hi, g.mu + kTruncationRadius * g.sigma);
  }
  return {lo, hi};
}

std::size_t PanelGrid::intervals(int level) const {
  std::size_t n = 0;
  for (int b : base) n += static_cast<std::size_t>(b) << level;
  return n;
}

std::vector<double> PanelGrid::nodes(int level) const {
  std::vector<double> x;
  x.reserve(intervals(level) + 1);
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const long n = static_cast<long>(base[p]) << level;
    const double a = breaks[p];
    const double h = (breaks[p + 1] - a) / static_cast<double>(n);
    for (long k = 0; k < n; ++k) x.push_back(a + h * static_cast<double>(k));
  }
  x.push_back(breaks.back());
  return x;
}

PanelGrid make_panel_grid(double lo, double hi, std::span<const GaussianSpec> features,
                          double narrow_ratio, int max_base) {
  if (!(lo < hi)) throw std::invalid_argument("make_panel_grid: empty window");
  const double width = hi - lo;
  static constexpr double kOffsets[] = {-8, -4, -2, -1, 0, 1, 2, 4, 8};

  std::vector<double> breaks{lo, hi};
  for (const auto& g : features) {
    if (g.sigma * narrow_ratio >= width) continue;
    for (double t : kOffsets) {
      const double b = g.mu + t * g.sigma;
      if (b > lo && b < hi) breaks.push_back(b);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  const double merge = 1e-12 * width;
  std::vector<double> merged;
  for (double b : breaks) {
    if (merged.empty() || b - merged.back() > merge) merged.push_back(b);
  }
  merged.back() = hi;

  PanelGrid grid;
  grid.breaks = merged;
  for (std::size_t p = 0; p + 1 < merged.size(); ++p) {
    const double a = merged[p];
    const double b = merged[p + 1];
    double scale = b - a;
    for (const auto& g : features) {
      const double reach = kTruncationRadius * g.sigma;
      if (g.mu + reach > a && g.mu - reach < b) scale = std::min(scale, g.sigma);
    }
    const double n = std::ceil((b - a) / scale);
    grid.base.push_back(static_cast<int>(std::clamp(n, 1.0, static_cast<double>(max_base))));
  }
  return grid;
}

void trapezoid_weights(std::span<const double> x, std::span<double> w) {
  const std::size_t n = x.size();
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double half = 0.5 * (x[k + 1] - x[k]);
    w[k] += half;
    w[k + 1] += half;
  }
}

}  // namespace bmcmc::quad
