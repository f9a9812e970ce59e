// The contract a target density implements for the sampler.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace bmcmc {

/// A target density over N_p free parameters.
///
/// `fixer` canonicalises a raw vector (sorting, sign folding, rescaling) and
/// must be idempotent. `log_density` is evaluated on canonical vectors only;
/// it may be stochastic but must be bounded above. Throwing, or returning a
/// non-finite value, marks the point as uncomputable and the chain rejects
/// it.
///
/// A chain calls its problem from a single thread. When one problem object
/// is shared by parallel chains it must be read-only or synchronise
/// internally.
class ProblemDefinition {
 public:
  virtual ~ProblemDefinition() = default;

  virtual std::size_t n_parameters() const = 0;

  virtual std::vector<double> fixer(std::span<const double> raw) const {
    return {raw.begin(), raw.end()};
  }

  virtual double log_density(std::span<const double> canonical) const = 0;
};

/// Wraps callables as a ProblemDefinition. An empty fixer means identity.
class FunctionProblem final : public ProblemDefinition {
 public:
  using LogDensityFn = std::function<double(std::span<const double>)>;
  using FixerFn = std::function<std::vector<double>(std::span<const double>)>;

  FunctionProblem(std::size_t n, LogDensityFn log_density, FixerFn fixer = {})
      : n_(n), log_density_(std::move(log_density)), fixer_(std::move(fixer)) {}

  std::size_t n_parameters() const override { return n_; }

  std::vector<double> fixer(std::span<const double> raw) const override {
    if (fixer_) return fixer_(raw);
    return {raw.begin(), raw.end()};
  }

  double log_density(std::span<const double> canonical) const override {
    return log_density_(canonical);
  }

 private:
  std::size_t n_;
  LogDensityFn log_density_;
  FixerFn fixer_;
};

/// Result of evaluating a raw vector. An empty log_density is the
/// "uncomputable" sentinel, kept distinct from -infinity in diagnostics.
struct Evaluation {
  std::vector<double> canonical;
  std::optional<double> log_density;

  bool computable() const noexcept { return log_density.has_value(); }
};

/// Applies the fixer then the log-density. Evaluation failures become the
/// uncomputable sentinel; a length mismatch is a caller bug and throws
/// std::invalid_argument.
Evaluation evaluate(const ProblemDefinition& problem, std::span<const double> raw);

/// One axis of a box constraint; a missing end is open.
struct AxisBounds {
  std::optional<double> lo;
  std::optional<double> hi;
};

/// Folds each coordinate into its box by reflecting at the walls, the
/// y = |q| construction extended to two walls. The map is piecewise
/// isometric, so sampling the symmetrised density and folding is equivalent
/// to sampling the truncated one.
std::vector<double> reflect_fix(std::span<const double> raw, std::span<const AxisBounds> box);

double reflect_into(double x, const AxisBounds& bounds);

}  // namespace bmcmc
