#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "bmcmc/fit.hpp"

using namespace bmcmc;

namespace {

FitConfig quick(ModelVariant v, std::uint64_t seed = 1) {
  FitConfig c;
  c.variant = v;
  c.n_e = 1000;
  c.seed = seed;
  c.workers = 1;
  return c;
}

CJParameters small_truth() {
  CJParameters p = make_template(ModelVariant::sdt, 3, 4);
  p.signal_means = {0.0, 0.8, 1.7};
  p.signal_sigmas = {1.0, 1.2, 0.8};
  p.criterion_means = {-0.6, 0.3, 1.0, 2.1};
  return fix_parameters(p, ModelVariant::sdt);
}

}  // namespace

TEST_CASE("configuration checks") {
  CHECK_NOTHROW(validate(FitConfig{}));
  auto bad = [](auto edit) {
    FitConfig c;
    edit(c);
    return c;
  };
  CHECK_THROWS_AS(validate(bad([](FitConfig& c) { c.restarts = 0; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FitConfig& c) { c.n_e = 0; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FitConfig& c) { c.confidence_level = 1.0; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FitConfig& c) { c.workers = -1; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FitConfig& c) { c.chain.anneal_decay = 1.5; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FitConfig& c) { c.chain.v_star = {0.0}; })), std::invalid_argument);
}

TEST_CASE("one stimulus, one criterion") {
  const RatingMatrix data(1, 2, {841, 159});
  const auto templ = make_template(ModelVariant::sdt, 1, 1);
  const FitResult fit = run_fit(data, templ, quick(ModelVariant::sdt));
  CHECK(fit.converged);
  CHECK(fit.restarts.size() == 3);
  CHECK(fit.best.criterion_means[0] == doctest::Approx(0.9986).epsilon(0.005));
  const Interval lim = fit.limits[2];  // muC[1]
  CHECK(lim.lo < 0.9986);
  CHECK(lim.hi > 0.9986);
  CHECK(lim.hi - lim.lo == doctest::Approx(2 * 1.96 * 0.048).epsilon(0.2));
  CHECK(fit.gof.rmsd < 1e-3);
  CHECK(fit.dof == 1);
  CHECK_FALSE(fit.flagged);
}

TEST_CASE("results do not depend on the worker count") {
  const auto truth = small_truth();
  Rng rng(3);
  const RatingMatrix data = simulate_matrix(truth, ModelVariant::sdt, 300, rng);
  const auto templ = make_template(ModelVariant::sdt, 3, 4);
  FitConfig one = quick(ModelVariant::sdt, 9);
  FitConfig three = one;
  three.workers = 3;
  const auto a = run_fit(data, templ, one);
  const auto b = run_fit(data, templ, three);
  REQUIRE(a.restarts.size() == b.restarts.size());
  for (std::size_t r = 0; r < a.restarts.size(); ++r) {
    CHECK(a.restarts[r].seed == 9 + r);
    CHECK(a.restarts[r].log_l == b.restarts[r].log_l);
    CHECK(a.restarts[r].best.values == b.restarts[r].best.values);
  }
  CHECK(a.selected == b.selected);
  for (std::size_t k = 0; k < a.limits.size(); ++k) {
    CHECK(a.limits[k].lo == b.limits[k].lo);
    CHECK(a.limits[k].hi == b.limits[k].hi);
  }
}

TEST_CASE("recovery of simulated data and the report") {
  const auto truth = small_truth();
  Rng rng(21);
  const RatingMatrix data = simulate_matrix(truth, ModelVariant::sdt, 2000, rng);
  const auto fit = run_fit(data, make_template(ModelVariant::sdt, 3, 4), quick(ModelVariant::sdt));
  const auto rec = compare_recovery(fit, truth);
  CHECK(rec.b == doctest::Approx(1.0).epsilon(0.05));
  CHECK(rec.generating.size() == fit.free_index.size());
  CHECK(rec.hits >= rec.generating.size() - 2);
  CHECK(rec.log_l_generating <= fit.log_l + 1e-9);
  CHECK(fit.predicted_limits.size() == 15);
  for (std::size_t c = 0; c < 15; ++c) {
    CHECK(fit.predicted_limits[c].lo <= fit.predicted[c] + 1e-3);
    CHECK(fit.predicted_limits[c].hi >= fit.predicted[c] - 1e-3);
  }

  const std::string json = fit_report_json(fit, rec);
  CHECK(json.find("\"recovery\"") != std::string::npos);
  CHECK(report_flagged(json) == fit.flagged);
  const std::string text = report_text(json);
  CHECK(text.find("fit report: SDT") == 0);
  CHECK(text.find("recovery: b ") != std::string::npos);
  CHECK(text.find("muC[4]") != std::string::npos);

  CJParameters wrong = make_template(ModelVariant::sdt, 2, 4);
  CHECK_THROWS_AS(compare_recovery(fit, wrong), std::invalid_argument);
}

TEST_CASE("fit quality improves with more trials") {
  const auto truth = small_truth();
  const auto templ = make_template(ModelVariant::sdt, 3, 4);
  std::vector<double> rmsd_200;
  std::vector<double> rmsd_1000;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (std::int64_t trials : {200, 1000}) {
      Rng rng(seed * 100 + static_cast<std::uint64_t>(trials));
      const auto data = simulate_matrix(truth, ModelVariant::sdt, trials, rng);
      FitConfig c = quick(ModelVariant::sdt, seed);
      c.restarts = 1;
      const double r = run_fit(data, templ, c).gof.rmsd;
      (trials == 200 ? rmsd_200 : rmsd_1000).push_back(r);
    }
  }
  std::sort(rmsd_200.begin(), rmsd_200.end());
  std::sort(rmsd_1000.begin(), rmsd_1000.end());
  CHECK(rmsd_1000[2] < rmsd_200[2]);
}

TEST_CASE("dimension mismatch and empty templates are rejected") {
  const RatingMatrix data(2, 3, {1, 1, 1, 1, 1, 1});
  CHECK_THROWS_AS(run_fit(data, make_template(ModelVariant::sdt, 3, 2), quick(ModelVariant::sdt)),
                  std::invalid_argument);
  auto frozen = make_template(ModelVariant::sdt, 2, 2);
  frozen.free_mask.assign(frozen.size(), false);
  CHECK_THROWS_AS(run_fit(data, frozen, quick(ModelVariant::sdt)), std::invalid_argument);
}
