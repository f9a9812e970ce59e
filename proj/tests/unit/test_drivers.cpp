#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "bmcmc/drivers.hpp"

using namespace bmcmc;

namespace {

FunctionProblem gaussian(std::vector<double> mu, std::vector<double> sd) {
  const std::size_t n = sd.size();
  return FunctionProblem(n, [mu, sd](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += 0.5 * std::pow((x[k] - mu[k]) / sd[k], 2);
    return -s;
  });
}

}  // namespace

TEST_CASE("reversals") {
  const std::vector<double> a{1.0, 0.0};
  const std::vector<double> b{-1.0, 0.1};
  const std::vector<double> c{0.0, 1.0};
  const std::vector<double> z{0.0, 0.0};
  CHECK(is_reversal(a, b));
  CHECK_FALSE(is_reversal(a, a));
  CHECK_FALSE(is_reversal(a, c));  // right angle is not a reversal
  CHECK(is_reversal(a, z));
  CHECK(is_reversal(z, a));
}

TEST_CASE("drift tracker samples every stride accepted steps") {
  DriftTracker t;
  t.stride = 2;
  // steady drift along +x: samples at 2, 4, 6, ... never reverse
  for (int k = 1; k <= 20; ++k) detect_drift(t, std::vector<double>{double(k)});
  CHECK(t.comparisons == 8);
  CHECK(t.reversal_count == 0);
  CHECK(t.sampled_points.size() == 3);

  DriftTracker z;
  z.stride = 1;
  for (int k = 0; k < 10; ++k) detect_drift(z, std::vector<double>{k % 2 == 0 ? 0.0 : 1.0});
  CHECK(z.comparisons == 8);
  CHECK(z.reversal_count == 8);
  z.clear();
  CHECK(z.sampled_points.empty());
  CHECK(z.reversal_count == 0);
}

TEST_CASE("budgets") {
  OptimisationConfig c;
  CHECK(drift_threshold(c, 3) == 10);
  CHECK(drift_threshold(c, 29) == 29);
  c.drift_threshold = 5;
  CHECK(drift_threshold(c, 29) == 5);
  CHECK(exploration_budget(3.0, 0.5) == doctest::Approx(12.0));
  CHECK(ergodic_budget(1.4, 10, 4000) == doctest::Approx(56000.0));
}

TEST_CASE("Hazen percentiles") {
  std::vector<double> x(1000);
  std::iota(x.begin(), x.end(), 1.0);  // order statistic k has value k
  CHECK(percentile_sorted(x, 0.025) == doctest::Approx(25.5));
  CHECK(percentile_sorted(x, 0.975) == doctest::Approx(975.5));
  CHECK(percentile_sorted(x, 0.5) == doctest::Approx(500.5));
  CHECK(percentile_sorted(x, 0.0) == 1.0);
  CHECK(percentile_sorted(x, 1.0) == 1000.0);
  const std::vector<double> one{4.0};
  CHECK(percentile_sorted(one, 0.3) == 4.0);
  CHECK_THROWS_AS(percentile_sorted(std::vector<double>{}, 0.5), std::invalid_argument);
}

TEST_CASE("confidence limits") {
  std::vector<std::vector<double>> s;
  for (int k = 0; k < 1000; ++k) s.push_back({double(1000 - k), -double(k)});
  const auto lim = confidence_limits(s, 0.95);
  REQUIRE(lim.size() == 2);
  CHECK(lim[0].lo == doctest::Approx(25.5));
  CHECK(lim[0].hi == doctest::Approx(975.5));
  CHECK(lim[1].lo == doctest::Approx(-974.5));
  CHECK(lim[1].hi == doctest::Approx(-24.5));
  s.resize(99);
  CHECK_THROWS_AS(confidence_limits(s, 0.95), std::invalid_argument);
  s.resize(100, {0.0, 0.0});
  CHECK_NOTHROW(confidence_limits(s, 0.95));
  CHECK_THROWS_AS(confidence_limits(s, 1.0), std::invalid_argument);
}

TEST_CASE("optimisation finds the mode of a correlated-scale target") {
  const auto problem = gaussian({3.0, -2.0, 0.5}, {0.01, 1.0, 100.0});
  Rng rng(2024);
  const auto r = run_optimisation(problem, std::vector<double>{0.0, 0.0, 0.0}, ChainConfig{},
                                  OptimisationConfig{}, rng);
  CHECK(r.converged);
  CHECK(r.best.log_density > -5.0);
  CHECK(r.best.values[0] == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("proposal cap returns the best point unconverged") {
  const auto problem = gaussian({0.0}, {1.0});
  OptimisationConfig c;
  c.max_proposals = 10;
  Rng rng(1);
  const auto r = run_optimisation(problem, std::vector<double>{5.0}, ChainConfig{}, c, rng);
  CHECK_FALSE(r.converged);
  CHECK(r.proposals == 10);
  CHECK(r.best.log_density >= -12.5);
}

TEST_CASE("sampling reproduces a Gaussian posterior") {
  const auto problem = gaussian({1.0, -1.0}, {2.0, 0.5});
  Rng rng(77);
  auto opt = run_optimisation(problem, std::vector<double>{0.0, 0.0}, ChainConfig{},
                              OptimisationConfig{}, rng);
  REQUIRE(opt.converged);
  const auto sam = run_sampling(problem, std::move(opt.state), 4000, ChainConfig{},
                                SamplingConfig{}, rng);
  REQUIRE(sam.converged);
  REQUIRE(sam.samples.size() >= 4000);
  std::vector<std::vector<double>> values;
  for (const auto& p : sam.samples) values.push_back(p.values);
  const auto lim = confidence_limits(values, 0.95);
  // +-1.96 sd with generous slack for autocorrelation
  CHECK(lim[0].lo == doctest::Approx(1.0 - 3.92).epsilon(0.15));
  CHECK(lim[0].hi == doctest::Approx(1.0 + 3.92).epsilon(0.15));
  CHECK(lim[1].lo == doctest::Approx(-1.0 - 0.98).epsilon(0.1));
  CHECK(lim[1].hi == doctest::Approx(-1.0 + 0.98).epsilon(0.25));
  CHECK_THROWS_AS(run_sampling(problem, sam.state, 0, ChainConfig{}, SamplingConfig{}, rng),
                  std::invalid_argument);
}

TEST_CASE("worked drift examples") {
  auto reversals = [](std::vector<std::vector<double>> pts) {
    DriftTracker t;
    t.stride = 1;
    for (const auto& p : pts) detect_drift(t, p);
    return t.reversal_count;
  };
  CHECK(reversals({{0, 0}, {1, 0}, {2, 0}}) == 0);
  CHECK(reversals({{0, 0}, {1, 0}, {0.5, 0}}) == 1);
  CHECK(reversals({{0, 0}, {1, 0}, {1, 1}}) == 0);
}

TEST_CASE("worked optimisation examples") {
  Rng rng(12);
  FunctionProblem quadratic(1, [](std::span<const double> x) { return -(x[0] - 3.0) * (x[0] - 3.0); });
  const auto q = run_optimisation(quadratic, std::vector<double>{-10.0}, ChainConfig{},
                                  OptimisationConfig{}, rng);
  CHECK(q.converged);
  CHECK(std::fabs(q.best.values[0] - 3.0) < 0.05);

  FunctionProblem ridge(2, [](std::span<const double> x) {
    return -std::pow(x[0] + x[1] - 2.0, 2) - 0.001 * std::pow(x[0] - x[1], 2);
  });
  const auto r = run_optimisation(ridge, std::vector<double>{10.0, -10.0}, ChainConfig{},
                                  OptimisationConfig{}, rng);
  CHECK(r.converged);
  CHECK(std::fabs(r.best.values[0] + r.best.values[1] - 2.0) < 0.1);

  FunctionProblem flat(2, [](std::span<const double>) { return 0.0; });
  const auto f = run_optimisation(flat, std::vector<double>{0.0, 0.0}, ChainConfig{},
                                  OptimisationConfig{}, rng);
  CHECK(f.converged);
}

TEST_CASE("worked sampling examples") {
  Rng rng(101);
  const auto standard = gaussian({0.0, 0.0}, {1.0, 1.0});
  auto opt = run_optimisation(standard, std::vector<double>{0.5, -0.5}, ChainConfig{},
                              OptimisationConfig{}, rng);
  const auto sam = run_sampling(standard, std::move(opt.state), 4000, ChainConfig{},
                                SamplingConfig{}, rng);
  REQUIRE(sam.converged);
  const double n = static_cast<double>(sam.samples.size());
  double m0 = 0.0;
  double m1 = 0.0;
  for (const auto& p : sam.samples) {
    m0 += p.values[0] / n;
    m1 += p.values[1] / n;
  }
  double c00 = 0.0;
  double c01 = 0.0;
  double c11 = 0.0;
  for (const auto& p : sam.samples) {
    c00 += (p.values[0] - m0) * (p.values[0] - m0) / n;
    c01 += (p.values[0] - m0) * (p.values[1] - m1) / n;
    c11 += (p.values[1] - m1) * (p.values[1] - m1) / n;
  }
  CHECK(std::fabs(m0) < 0.05);
  CHECK(std::fabs(m1) < 0.05);
  CHECK(c00 == doctest::Approx(1.0).epsilon(0.1));
  CHECK(c11 == doctest::Approx(1.0).epsilon(0.1));
  CHECK(std::fabs(c01) < 0.1);

  const auto one = gaussian({0.0}, {1.0});
  auto opt1 = run_optimisation(one, std::vector<double>{0.3}, ChainConfig{}, OptimisationConfig{}, rng);
  const auto s1 = run_sampling(one, std::move(opt1.state), 4000, ChainConfig{}, SamplingConfig{}, rng);
  std::vector<std::vector<double>> values;
  for (const auto& p : s1.samples) values.push_back(p.values);
  const auto lim = confidence_limits(values, 0.95);
  CHECK(std::fabs(lim[0].lo + 1.96) < 0.1);
  CHECK(std::fabs(lim[0].hi - 1.96) < 0.1);

  std::vector<std::vector<double>> same(200, std::vector<double>{2.5});
  const auto zero = confidence_limits(same, 0.95);
  CHECK(zero[0].lo == 2.5);
  CHECK(zero[0].hi == 2.5);

  CHECK(std::ceil(ergodic_budget(1.4, 2, 10)) == 28.0);
}
