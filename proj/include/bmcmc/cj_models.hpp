// Law of Categorical Judgment (Corrected) likelihoods.
//
// Each stimulus h projects a Gaussian N(muS[h], sigS[h]) onto the decision
// continuum and each criterion i a Gaussian N(muC[i], sigC[i]). On a trial
// the observer answers i when c_i is the smallest criterion sample at or
// above the signal sample s, and M+1 when every criterion falls below s.
//
//   FSDT  both signal and criteria random
//   SDT   criteria fixed at their means
//   CSDT  signals fixed at their means

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bmcmc/problem.hpp"
#include "bmcmc/quadrature.hpp"
#include "bmcmc/rating_matrix.hpp"

namespace bmcmc {

enum class ModelVariant { fsdt, sdt, csdt };

std::string_view to_string(ModelVariant v);
/// Accepts FSDT/SDT/CSDT in any case.
std::optional<ModelVariant> parse_variant(std::string_view text);

/// Which block of the flattened parameter layout an entry belongs to.
enum class ParameterKind { signal_mean, signal_sigma, criterion_mean, criterion_sigma };

/// Signal and criterion Gaussians for N stimuli and M criteria.
///
/// Flattened layout: muS[0..N), sigS[0..N), muC[0..M), sigC[0..M). Entries
/// marked fixed keep their template value. For SDT the criterion sigmas and
/// for CSDT the signal sigmas are not model parameters (delta limit); they
/// are carried fixed and ignored.
struct CJParameters {
  std::vector<double> signal_means;
  std::vector<double> signal_sigmas;
  std::vector<double> criterion_means;
  std::vector<double> criterion_sigmas;
  std::vector<bool> free_mask;

  std::size_t n_stimuli() const noexcept { return signal_means.size(); }
  std::size_t n_criteria() const noexcept { return criterion_means.size(); }
  std::size_t size() const noexcept { return 2 * (n_stimuli() + n_criteria()); }

  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);

  ParameterKind kind(std::size_t flat_index) const;
  /// Index within its block, 0-based.
  std::size_t block_index(std::size_t flat_index) const;
  /// muS[1], sigS[1], muC[1], sigC[1], ... (1-based, as in parameter files).
  std::string name(std::size_t flat_index) const;

  /// Packs the free entries.
  std::vector<double> free_values() const;
  std::size_t n_free() const;

  quad::GaussianSpec signal(std::size_t h) const { return {signal_means[h], signal_sigmas[h]}; }
  quad::GaussianSpec criterion(std::size_t i) const {
    return {criterion_means[i], criterion_sigmas[i]};
  }
};

/// Whether a flat entry is a parameter of the variant at all.
bool is_model_parameter(const CJParameters& params, ModelVariant variant, std::size_t flat_index);

/// A template with muS[1] fixed at zero, the unused sigma block fixed, and
/// every other entry free. Values: signal means 0, 1, 2, ...; criterion
/// means evenly spread over [-1, N]; sigmas 1.
CJParameters make_template(ModelVariant variant, std::size_t n_stimuli, std::size_t n_criteria);

/// Unpacks `raw` into the template's free slots and canonicalises:
///  1. muS[1] = 0; other signal means take |value| and are sorted ascending;
///  2. criterion means are sorted ascending;
///  3. sigmas take |value|;
///  4. free means and sigmas are divided by the mean of the free sigmas.
/// Sorting moves values among free slots only. Idempotent.
CJParameters fix_parameters(std::span<const double> raw, const CJParameters& templ,
                            ModelVariant variant);

/// Canonicalises a complete parameter set (all entries, including fixed).
CJParameters fix_parameters(const CJParameters& params, ModelVariant variant);

struct LikelihoodOptions {
  double rel_tol = 1e-3;
  double abs_tol = 1e-8;
  /// Levels computed before convergence is tested, and the level cap, for
  /// the shared-grid Romberg tables.
  int min_levels = 2;
  int max_levels = 8;
  /// Upper bound on nodes in one grid; exceeding it is a quadrature failure.
  std::size_t max_nodes = 1 << 14;
  /// Negative mass clamped to zero on top of the summed stopping tolerance
  /// of the integrated cells. Beyond that the point is uncomputable.
  double negative_tolerance = 1e-6;
};

/// P(R = i | S_h) for i = 1..M+1. Throws quad::RombergError when the
/// quadrature cannot meet the tolerance and std::domain_error when the
/// complement cell is negative beyond it.
std::vector<double> response_probabilities(const CJParameters& params, ModelVariant variant,
                                           std::size_t h, const LikelihoodOptions& opt = {});

/// Row-major N x (M+1) matrix of response probabilities.
std::vector<double> response_matrix(const CJParameters& params, ModelVariant variant,
                                    const LikelihoodOptions& opt = {});

/// Sum over unconstrained sigmas of 0.1 / sigma.
double soft_sigma_term(const CJParameters& params, ModelVariant variant);

/// Multinomial log-likelihood sum_h sum_i count * ln P, minus the soft sigma
/// term when `include_soft_penalty`. Returns -infinity when a cell with a
/// nonzero count has zero probability. Throws std::invalid_argument on a
/// dimension mismatch.
double log_likelihood(const CJParameters& params, ModelVariant variant, const RatingMatrix& data,
                      bool include_soft_penalty, const LikelihoodOptions& opt = {});

/// Adapter exposing a rating-data fit as a ProblemDefinition over the
/// template's free entries. The log-density includes the soft penalty.
class CJProblem final : public ProblemDefinition {
 public:
  CJProblem(RatingMatrix data, CJParameters templ, ModelVariant variant,
            LikelihoodOptions options = {});

  std::size_t n_parameters() const override { return n_free_; }
  std::vector<double> fixer(std::span<const double> raw) const override;
  double log_density(std::span<const double> canonical) const override;

  CJParameters unpack(std::span<const double> canonical) const;
  ModelVariant variant() const noexcept { return variant_; }
  const CJParameters& parameter_template() const noexcept { return template_; }
  const RatingMatrix& data() const noexcept { return data_; }

 private:
  RatingMatrix data_;
  CJParameters template_;
  ModelVariant variant_;
  LikelihoodOptions options_;
  std::size_t n_free_;
};

}  // namespace bmcmc
