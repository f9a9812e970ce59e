#include "bmcmc/problem.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bmcmc {

Evaluation evaluate(const ProblemDefinition& problem, std::span<const double> raw) {
  if (raw.size() != problem.n_parameters()) {
    throw std::invalid_argument("evaluate: expected " + std::to_string(problem.n_parameters()) +
                                " parameters, got " + std::to_string(raw.size()));
  }
  Evaluation out;
  out.canonical = problem.fixer(raw);
  if (out.canonical.size() != raw.size()) {
    throw std::logic_error("evaluate: fixer changed the parameter count");
  }
  try {
    const double value = problem.log_density(out.canonical);
    if (std::isfinite(value)) out.log_density = value;
  } catch (const std::exception&) {
    // uncomputable
  }
  return out;
}

double reflect_into(double x, const AxisBounds& bounds) {
  if (bounds.lo && bounds.hi) {
    const double lo = *bounds.lo;
    const double width = *bounds.hi - lo;
    if (!(width > 0)) throw std::invalid_argument("reflect_into: lo must be below hi");
    double t = std::fmod(x - lo, 2.0 * width);
    if (t < 0) t += 2.0 * width;
    if (t > width) t = 2.0 * width - t;
    return lo + t;
  }
  if (bounds.lo) return *bounds.lo + std::abs(x - *bounds.lo);
  if (bounds.hi) return *bounds.hi - std::abs(*bounds.hi - x);
  return x;
}

std::vector<double> reflect_fix(std::span<const double> raw, std::span<const AxisBounds> box) {
  if (raw.size() != box.size()) throw std::invalid_argument("reflect_fix: box size mismatch");
  std::vector<double> out(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) out[k] = reflect_into(raw[k], box[k]);
  return out;
}

}  // namespace bmcmc
