#include "bmcmc/cj_models.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bmcmc {

using quad::GaussianSpec;

std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::fsdt: return "FSDT";
    case ModelVariant::sdt: return "SDT";
    case ModelVariant::csdt: return "CSDT";
  }
  return "?";
}

std::optional<ModelVariant> parse_variant(std::string_view text) {
  std::string upper(text);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "FSDT") return ModelVariant::fsdt;
  if (upper == "SDT") return ModelVariant::sdt;
  if (upper == "CSDT") return ModelVariant::csdt;
  return std::nullopt;
}

std::vector<double> CJParameters::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  flat.insert(flat.end(), signal_means.begin(), signal_means.end());
  flat.insert(flat.end(), signal_sigmas.begin(), signal_sigmas.end());
  flat.insert(flat.end(), criterion_means.begin(), criterion_means.end());
  flat.insert(flat.end(), criterion_sigmas.begin(), criterion_sigmas.end());
  return flat;
}

void CJParameters::assign_flat(std::span<const double> flat) {
  if (flat.size() != size()) throw std::invalid_argument("CJParameters: flat size mismatch");
  const std::size_t n = n_stimuli();
  const std::size_t m = n_criteria();
  auto it = flat.begin();
  std::copy_n(it, n, signal_means.begin());
  std::copy_n(it + n, n, signal_sigmas.begin());
  std::copy_n(it + 2 * n, m, criterion_means.begin());
  std::copy_n(it + 2 * n + m, m, criterion_sigmas.begin());
}

ParameterKind CJParameters::kind(std::size_t k) const {
  const std::size_t n = n_stimuli();
  const std::size_t m = n_criteria();
  if (k < n) return ParameterKind::signal_mean;
  if (k < 2 * n) return ParameterKind::signal_sigma;
  if (k < 2 * n + m) return ParameterKind::criterion_mean;
  if (k < 2 * n + 2 * m) return ParameterKind::criterion_sigma;
  throw std::out_of_range("CJParameters: flat index out of range");
}

std::size_t CJParameters::block_index(std::size_t k) const {
  const std::size_t n = n_stimuli();
  const std::size_t m = n_criteria();
  switch (kind(k)) {
    case ParameterKind::signal_mean: return k;
    case ParameterKind::signal_sigma: return k - n;
    case ParameterKind::criterion_mean: return k - 2 * n;
    case ParameterKind::criterion_sigma: return k - 2 * n - m;
  }
  return 0;
}

std::string CJParameters::name(std::size_t k) const {
  static constexpr const char* kPrefix[] = {"muS", "sigS", "muC", "sigC"};
  return std::string(kPrefix[static_cast<int>(kind(k))]) + "[" + std::to_string(block_index(k) + 1) + "]";
}

std::vector<double> CJParameters::free_values() const {
  const std::vector<double> flat = flatten();
  std::vector<double> out;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    if (free_mask[k]) out.push_back(flat[k]);
  }
  return out;
}

std::size_t CJParameters::n_free() const {
  return static_cast<std::size_t>(std::count(free_mask.begin(), free_mask.end(), true));
}

bool is_model_parameter(const CJParameters& params, ModelVariant variant, std::size_t k) {
  const ParameterKind kind = params.kind(k);
  if (variant == ModelVariant::sdt && kind == ParameterKind::criterion_sigma) return false;
  if (variant == ModelVariant::csdt && kind == ParameterKind::signal_sigma) return false;
  return true;
}

CJParameters make_template(ModelVariant variant, std::size_t n_stimuli, std::size_t n_criteria) {
  if (n_stimuli == 0 || n_criteria == 0) {
    throw std::invalid_argument("make_template: need at least one stimulus and one criterion");
  }
  CJParameters p;
  for (std::size_t h = 0; h < n_stimuli; ++h) p.signal_means.push_back(static_cast<double>(h));
  p.signal_sigmas.assign(n_stimuli, 1.0);
  const double lo = -1.0;
  const double hi = static_cast<double>(n_stimuli);
  for (std::size_t i = 0; i < n_criteria; ++i) {
    const double t = n_criteria == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n_criteria - 1);
    p.criterion_means.push_back(lo + t * (hi - lo));
  }
  p.criterion_sigmas.assign(n_criteria, 1.0);
  p.free_mask.assign(p.size(), true);
  p.free_mask[0] = false;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!is_model_parameter(p, variant, k)) p.free_mask[k] = false;
  }
  return p;
}

namespace {

// Sorts the values held in the free slots of `values` (indices from `first`)
// while leaving fixed slots alone.
void sort_free_slots(std::vector<double>& values, const std::vector<bool>& free_mask,
                     std::size_t offset, std::size_t first) {
  std::vector<std::size_t> slots;
  std::vector<double> picked;
  for (std::size_t k = first; k < values.size(); ++k) {
    if (free_mask[offset + k]) {
      slots.push_back(k);
      picked.push_back(values[k]);
    }
  }
  std::sort(picked.begin(), picked.end());
  for (std::size_t s = 0; s < slots.size(); ++s) values[slots[s]] = picked[s];
}

}  // namespace

CJParameters fix_parameters(const CJParameters& params, ModelVariant variant) {
  CJParameters p = params;
  const std::size_t n = p.n_stimuli();
  const std::size_t m = p.n_criteria();
  const auto& free = p.free_mask;
  const std::size_t sig_s = n;
  const std::size_t mu_c = 2 * n;
  const std::size_t sig_c = 2 * n + m;
  const bool signal_sigmas_used = variant != ModelVariant::csdt;
  const bool criterion_sigmas_used = variant != ModelVariant::sdt;

  // 1. first signal mean pinned, the rest folded positive and ordered
  p.signal_means[0] = 0.0;
  for (std::size_t h = 1; h < n; ++h) {
    if (free[h]) p.signal_means[h] = std::abs(p.signal_means[h]);
  }
  sort_free_slots(p.signal_means, free, 0, 1);

  // 2. criterion means ordered, sign kept
  sort_free_slots(p.criterion_means, free, mu_c, 0);

  // 3. sigmas positive
  double sigma_sum = 0.0;
  std::size_t sigma_count = 0;
  if (signal_sigmas_used) {
    for (std::size_t h = 0; h < n; ++h) {
      if (!free[sig_s + h]) continue;
      p.signal_sigmas[h] = std::abs(p.signal_sigmas[h]);
      sigma_sum += p.signal_sigmas[h];
      ++sigma_count;
    }
  }
  if (criterion_sigmas_used) {
    for (std::size_t i = 0; i < m; ++i) {
      if (!free[sig_c + i]) continue;
      p.criterion_sigmas[i] = std::abs(p.criterion_sigmas[i]);
      sigma_sum += p.criterion_sigmas[i];
      ++sigma_count;
    }
  }

  // 4. unit mean of the free sigmas
  if (sigma_count == 0) return p;
  const double scale = sigma_sum / static_cast<double>(sigma_count);
  if (!(scale > 0.0) || !std::isfinite(scale)) return p;
  if (std::abs(scale - 1.0) <= 8.0 * std::numeric_limits<double>::epsilon()) return p;
  for (std::size_t h = 1; h < n; ++h) {
    if (free[h]) p.signal_means[h] /= scale;
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (free[mu_c + i]) p.criterion_means[i] /= scale;
  }
  if (signal_sigmas_used) {
    for (std::size_t h = 0; h < n; ++h) {
      if (free[sig_s + h]) p.signal_sigmas[h] /= scale;
    }
  }
  if (criterion_sigmas_used) {
    for (std::size_t i = 0; i < m; ++i) {
      if (free[sig_c + i]) p.criterion_sigmas[i] /= scale;
    }
  }
  return p;
}

CJParameters fix_parameters(std::span<const double> raw, const CJParameters& templ,
                            ModelVariant variant) {
  if (raw.size() != templ.n_free()) {
    throw std::invalid_argument("fix_parameters: expected " + std::to_string(templ.n_free()) +
                                " free values, got " + std::to_string(raw.size()));
  }
  std::vector<double> flat = templ.flatten();
  std::size_t next = 0;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    if (templ.free_mask[k]) flat[k] = raw[next++];
  }
  CJParameters p = templ;
  p.assign_flat(flat);
  return fix_parameters(p, variant);
}

namespace {

void check_sigmas(const CJParameters& p, ModelVariant variant) {
  auto positive = [](double s) { return s > 0.0 && std::isfinite(s); };
  if (variant != ModelVariant::csdt && !std::all_of(p.signal_sigmas.begin(), p.signal_sigmas.end(), positive)) {
    throw std::domain_error("signal standard deviations must be positive");
  }
  if (variant != ModelVariant::sdt &&
      !std::all_of(p.criterion_sigmas.begin(), p.criterion_sigmas.end(), positive)) {
    throw std::domain_error("criterion standard deviations must be positive");
  }
}

// Completes P(R = M+1) as the complement. Integrated cells carry a stopping
// error of up to max(rel * P, abs) each, so a negative entry within their
// summed tolerance is round-off: it is clamped and the row renormalised.
std::vector<double> finish(std::vector<double> probs, const LikelihoodOptions& opt,
                           bool integrated) {
  double sum = 0.0;
  double budget = opt.negative_tolerance;
  for (double p : probs) {
    sum += p;
    if (integrated) budget += std::max(opt.rel_tol * std::abs(p), opt.abs_tol);
  }
  probs.push_back(1.0 - sum);
  double clamped = 0.0;
  for (double& p : probs) {
    if (p < 0.0) {
      if (p < -budget) {
        throw std::domain_error("negative response probability beyond the quadrature tolerance");
      }
      clamped -= p;
      p = 0.0;
    }
  }
  if (clamped > 0.0) {
    for (double& p : probs) p /= 1.0 + clamped;
  }
  return probs;
}

std::vector<double> sdt_probabilities(const CJParameters& p, std::size_t h) {
  const GaussianSpec s = p.signal(h);
  const std::size_t m = p.n_criteria();
  std::vector<double> probs(m);
  double lower = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const double upper = p.criterion_means[i];
    probs[i] = std::isinf(lower) ? quad::Phi(upper, s) : quad::interval_mass(lower, upper, s);
    lower = upper;
  }
  return probs;
}

// Signal fixed at s = muS[h]; one Romberg table over c in [s, hi]
// for all criteria at once.
std::vector<double> csdt_probabilities(const CJParameters& p, std::size_t h,
                                       const LikelihoodOptions& opt) {
  const std::size_t m = p.n_criteria();
  const double s = p.signal_means[h];
  std::vector<GaussianSpec> criteria(m);
  for (std::size_t i = 0; i < m; ++i) criteria[i] = p.criterion(i);
  const double hi = quad::truncate_infinite(s, std::numeric_limits<double>::infinity(), criteria).second;
  if (!(s < hi)) return std::vector<double>(m, 0.0);

  std::vector<double> below(m);  // Phi_j(s)
  for (std::size_t j = 0; j < m; ++j) below[j] = quad::Phi(s, criteria[j]);

  const quad::PanelGrid grid = quad::make_panel_grid(s, hi, criteria);
  quad::RichardsonTable table(m);
  std::vector<double> trapezoid(m);
  std::vector<double> t(m);
  std::vector<double> prefix(m + 1);
  for (int level = 0; level <= opt.max_levels; ++level) {
    const std::vector<double> x = grid.nodes(level);
    if (x.size() > opt.max_nodes) break;
    std::vector<double> w(x.size());
    quad::trapezoid_weights(x, w);
    std::fill(trapezoid.begin(), trapezoid.end(), 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
      for (std::size_t j = 0; j < m; ++j) t[j] = quad::Phi_upper(x[k], criteria[j]) + below[j];
      prefix[0] = 1.0;
      for (std::size_t j = 0; j < m; ++j) prefix[j + 1] = prefix[j] * t[j];
      double suffix = 1.0;
      for (std::size_t j = m; j-- > 0;) {
        trapezoid[j] += w[k] * quad::phi(x[k], criteria[j]) * prefix[j] * suffix;
        suffix *= t[j];
      }
    }
    table.push(trapezoid);
    if (level + 1 >= opt.min_levels && table.excess(opt.rel_tol, opt.abs_tol) <= 0.0) {
      const auto est = table.estimate();
      return {est.begin(), est.end()};
    }
  }
  const auto est = table.estimate();
  throw quad::RombergError(est.empty() ? 0.0 : est[0], table.gap());
}

// Full model with the product-term limit read as the outer variable:
//   P_i = int dc phi_i(c) int_{-inf}^{c} ds phi_S(s) prod_{j != i} [Q_j(c) + Phi_j(s)]
// evaluated on one grid shared by s and c, so the inner integral up to
// every node is a partial trapezoid sum and all criteria share the tables.
std::vector<double> fsdt_probabilities(const CJParameters& p, std::size_t h,
                                       const LikelihoodOptions& opt) {
  const std::size_t m = p.n_criteria();
  const GaussianSpec signal = p.signal(h);
  std::vector<GaussianSpec> criteria(m);
  for (std::size_t i = 0; i < m; ++i) criteria[i] = p.criterion(i);

  const std::array<GaussianSpec, 1> signal_only{signal};
  const double lo = quad::truncate_infinite(-std::numeric_limits<double>::infinity(), 0.0, signal_only).first;
  const double hi = quad::truncate_infinite(lo, std::numeric_limits<double>::infinity(), criteria).second;
  if (!(lo < hi)) return std::vector<double>(m, 0.0);
  const double signal_top = signal.mu + quad::kTruncationRadius * signal.sigma;

  std::vector<GaussianSpec> features = criteria;
  features.push_back(signal);
  const quad::PanelGrid grid = quad::make_panel_grid(lo, hi, features);

  quad::RichardsonTable table(m);
  std::vector<double> trapezoid(m);
  std::vector<double> acc(m);
  for (int level = 0; level <= opt.max_levels; ++level) {
    const std::vector<double> x = grid.nodes(level);
    const std::size_t n_nodes = x.size();
    if (n_nodes > opt.max_nodes) break;
    std::vector<double> w(n_nodes);
    quad::trapezoid_weights(x, w);

    // s-side tables: weighted signal density and Phi_j(s)
    std::size_t s_end = n_nodes;  // nodes with s beyond signal_top contribute nothing
    while (s_end > 0 && x[s_end - 1] > signal_top) --s_end;
    std::vector<double> ws(n_nodes);
    for (std::size_t l = 0; l < n_nodes; ++l) ws[l] = w[l] * quad::phi(x[l], signal);
    std::vector<double> below(m * n_nodes);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t l = 0; l < n_nodes; ++l) below[j * n_nodes + l] = quad::Phi(x[l], criteria[j]);
    }

    std::vector<double> prefix(m * n_nodes);
    std::vector<double> suffix(n_nodes);
    std::vector<double> above(m);
    std::vector<double> outer(m);
    std::fill(trapezoid.begin(), trapezoid.end(), 0.0);

    for (std::size_t k = 1; k < n_nodes; ++k) {
      const double c = x[k];
      bool any = false;
      for (std::size_t i = 0; i < m; ++i) {
        outer[i] = w[k] * quad::phi(c, criteria[i]);
        any = any || outer[i] > 0.0;
      }
      if (!any) continue;
      for (std::size_t j = 0; j < m; ++j) above[j] = quad::Phi_upper(c, criteria[j]);

      // Full-grid weights are the partial-grid weights for every l < k; the
      // diagonal node gets a half interval and its product term is 1.
      const std::size_t n_inner = std::min(k, s_end);
      double* pre = prefix.data();
      std::copy_n(ws.data(), n_inner, pre);
      for (std::size_t j = 0; j + 1 < m; ++j) {
        const double* b = below.data() + j * n_nodes;
        const double a = above[j];
        const double* src = pre + j * n_nodes;
        double* dst = pre + (j + 1) * n_nodes;
#pragma omp simd
        for (std::size_t l = 0; l < n_inner; ++l) dst[l] = src[l] * (a + b[l]);
      }
      std::fill_n(suffix.data(), n_inner, 1.0);
      for (std::size_t j = m; j-- > 0;) {
        const double* src = pre + j * n_nodes;
        const double* b = below.data() + j * n_nodes;
        const double a = above[j];
        double* sfx = suffix.data();
        double dot = 0.0;
#pragma omp simd reduction(+ : dot)
        for (std::size_t l = 0; l < n_inner; ++l) {
          dot += src[l] * sfx[l];
          sfx[l] *= a + b[l];
        }
        acc[j] = dot;
      }
      const double diagonal = 0.5 * (x[k] - x[k - 1]) * quad::phi(c, signal);
      for (std::size_t i = 0; i < m; ++i) trapezoid[i] += outer[i] * (acc[i] + diagonal);
    }

    table.push(trapezoid);
    if (level + 1 >= opt.min_levels && table.excess(opt.rel_tol, opt.abs_tol) <= 0.0) {
      const auto est = table.estimate();
      return {est.begin(), est.end()};
    }
  }
  const auto est = table.estimate();
  throw quad::RombergError(est.empty() ? 0.0 : est[0], table.gap());
}

}  // namespace

std::vector<double> response_probabilities(const CJParameters& params, ModelVariant variant,
                                           std::size_t h, const LikelihoodOptions& opt) {
  if (h >= params.n_stimuli()) throw std::out_of_range("response_probabilities: stimulus index");
  check_sigmas(params, variant);
  switch (variant) {
    case ModelVariant::sdt: return finish(sdt_probabilities(params, h), opt, false);
    case ModelVariant::csdt: return finish(csdt_probabilities(params, h, opt), opt, true);
    case ModelVariant::fsdt: return finish(fsdt_probabilities(params, h, opt), opt, true);
  }
  throw std::logic_error("unknown model variant");
}

std::vector<double> response_matrix(const CJParameters& params, ModelVariant variant,
                                    const LikelihoodOptions& opt) {
  std::vector<double> out;
  out.reserve(params.n_stimuli() * (params.n_criteria() + 1));
  for (std::size_t h = 0; h < params.n_stimuli(); ++h) {
    const auto row = response_probabilities(params, variant, h, opt);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

double soft_sigma_term(const CJParameters& params, ModelVariant variant) {
  double term = 0.0;
  const std::size_t n = params.n_stimuli();
  const std::size_t m = params.n_criteria();
  if (variant != ModelVariant::csdt) {
    for (std::size_t h = 0; h < n; ++h) {
      if (params.free_mask[n + h]) term += 0.1 / params.signal_sigmas[h];
    }
  }
  if (variant != ModelVariant::sdt) {
    for (std::size_t i = 0; i < m; ++i) {
      if (params.free_mask[2 * n + m + i]) term += 0.1 / params.criterion_sigmas[i];
    }
  }
  return term;
}

double log_likelihood(const CJParameters& params, ModelVariant variant, const RatingMatrix& data,
                      bool include_soft_penalty, const LikelihoodOptions& opt) {
  if (data.n_stimuli() != params.n_stimuli() || data.n_responses() != params.n_criteria() + 1) {
    throw std::invalid_argument("log_likelihood: data is " + std::to_string(data.n_stimuli()) + "x" +
                                std::to_string(data.n_responses()) + " but parameters describe " +
                                std::to_string(params.n_stimuli()) + "x" +
                                std::to_string(params.n_criteria() + 1));
  }
  double total = 0.0;
  for (std::size_t h = 0; h < params.n_stimuli(); ++h) {
    const auto probs = response_probabilities(params, variant, h, opt);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const auto count = data.count(h, i);
      if (count == 0) continue;
      if (!(probs[i] > 0.0)) return -std::numeric_limits<double>::infinity();
      total += static_cast<double>(count) * std::log(probs[i]);
    }
  }
  if (include_soft_penalty) total -= soft_sigma_term(params, variant);
  return total;
}

CJProblem::CJProblem(RatingMatrix data, CJParameters templ, ModelVariant variant,
                     LikelihoodOptions options)
    : data_(std::move(data)),
      template_(std::move(templ)),
      variant_(variant),
      options_(options),
      n_free_(template_.n_free()) {
  if (data_.n_stimuli() != template_.n_stimuli() ||
      data_.n_responses() != template_.n_criteria() + 1) {
    throw std::invalid_argument("CJProblem: data and parameter template dimensions differ");
  }
}

std::vector<double> CJProblem::fixer(std::span<const double> raw) const {
  return fix_parameters(raw, template_, variant_).free_values();
}

CJParameters CJProblem::unpack(std::span<const double> canonical) const {
  std::vector<double> flat = template_.flatten();
  std::size_t next = 0;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    if (template_.free_mask[k]) flat[k] = canonical[next++];
  }
  CJParameters p = template_;
  p.assign_flat(flat);
  return p;
}

double CJProblem::log_density(std::span<const double> canonical) const {
  return log_likelihood(unpack(canonical), variant_, data_, true, options_);
}

}  // namespace bmcmc
