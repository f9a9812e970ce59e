#include <cmath>
#include <cstdint>
#include <random>
#include <limits>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "bmcmc/sim_gof.hpp"

using namespace bmcmc;

namespace {

CJParameters make(std::vector<double> sm, std::vector<double> ss, std::vector<double> cm,
                  std::vector<double> cs) {
  CJParameters p;
  p.signal_means = std::move(sm);
  p.signal_sigmas = std::move(ss);
  p.criterion_means = std::move(cm);
  p.criterion_sigmas = std::move(cs);
  p.free_mask.assign(p.size(), true);
  p.free_mask[0] = false;
  return p;
}

}  // namespace

TEST_CASE("decision rule") {
  const std::vector<double> c{-1.0, 0.5, 0.2, 3.0};
  CHECK(decide(0.0, c) == 2);  // smallest criterion at or above the signal
  CHECK(decide(0.2, c) == 2);  // ties count as at or above
  CHECK(decide(-5.0, c) == 0);
  CHECK(decide(4.0, c) == 4);  // all below: response M+1
}

TEST_CASE("simulated frequencies match the model") {
  const auto p = make({0.0, 0.8, 1.9}, {1.0, 1.4, 0.7}, {-0.5, 0.4, 1.1, 2.2}, {0.9, 1.3, 0.6, 1.5});
  const std::int64_t trials = 1'000'000;
  for (ModelVariant v : {ModelVariant::fsdt, ModelVariant::sdt, ModelVariant::csdt}) {
    Rng rng(31);
    const RatingMatrix m = simulate_matrix(p, v, trials, rng);
    CHECK(m.trials_per_stimulus() == trials);
    const auto probs = response_matrix(p, v);
    for (std::size_t h = 0; h < 3; ++h) {
      for (std::size_t i = 0; i < 5; ++i) {
        const double pr = probs[h * 5 + i];
        const double se = std::sqrt(pr * (1.0 - pr) / static_cast<double>(trials));
        CHECK(std::fabs(m.proportion(h, i) - pr) <= 4.0 * se + 1e-12);
      }
    }
  }
}

TEST_CASE("median split simulation") {
  const auto p = make({0.0}, {1.0}, {0.0}, {1.0});
  Rng rng(8);
  const auto m = simulate_matrix(p, ModelVariant::sdt, 1'000'000, rng);
  CHECK(std::fabs(static_cast<double>(m.count(0, 0)) - 500000.0) <= 3.0 * 500.0);
}

TEST_CASE("simulation is deterministic for a seed") {
  const auto p = make({0.0, 1.0}, {1.0, 1.0}, {0.0, 1.0}, {1.0, 1.0});
  Rng a(5);
  Rng b(5);
  CHECK(simulate_matrix(p, ModelVariant::fsdt, 1000, a) == simulate_matrix(p, ModelVariant::fsdt, 1000, b));
  CHECK_THROWS_AS(simulate_matrix(p, ModelVariant::fsdt, 0, a), std::invalid_argument);
}

TEST_CASE("perfect agreement") {
  const RatingMatrix m(2, 3, {50, 30, 20, 10, 40, 50});
  const auto p = m.proportions();
  const auto r = gof(m, p);
  CHECK(r.rmsd == doctest::Approx(0.0));
  CHECK(r.r_squared == doctest::Approx(1.0));
  CHECK(std::fabs(r.b0) < 1e-15);
  CHECK(r.b1 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::fabs(r.kl_bits) < 1e-15);
}

TEST_CASE("two-cell example") {
  const RatingMatrix m(1, 2, {60, 40});
  const std::vector<double> predicted{0.5, 0.5};
  const auto r = gof(m, predicted);
  CHECK(r.rmsd == doctest::Approx(0.1));
  const double kl = 0.5 * std::log2(0.5 / 0.6) + 0.5 * std::log2(0.5 / 0.4);
  CHECK(r.kl_bits == doctest::Approx(kl));
  CHECK(r.kl_bits == doctest::Approx(0.0294).epsilon(0.01));
  CHECK(std::isinf(r.b0_half_width));  // two cells leave no residual dof
  CHECK(r.kl_floor == doctest::Approx(1.0 / 200.0));
}

TEST_CASE("KL floors empty observed cells and skips impossible ones") {
  const RatingMatrix m(1, 3, {10, 0, 0});
  const std::vector<double> predicted{0.9, 0.1, 0.0};
  const auto r = gof(m, predicted);
  const double floor = 1.0 / 20.0;
  const double total = 1.0 + 2.0 * floor;
  CHECK(r.kl_bits == doctest::Approx(0.9 * std::log2(0.9 * total) + 0.1 * std::log2(0.1 * total / floor)));
  CHECK(r.kl_bits >= -1e-12);
  CHECK_THROWS_AS(gof(m, std::vector<double>{0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("KL is non-negative on sparse matrices") {
  Rng rng(17);
  std::uniform_int_distribution<int> cell(0, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int draw = 0; draw < 200; ++draw) {
    std::vector<std::int64_t> counts(3 * 6, 0);
    for (std::size_t h = 0; h < 3; ++h) {
      for (int t = 0; t < 8; ++t) ++counts[h * 6 + static_cast<std::size_t>(cell(rng))];
    }
    std::vector<double> predicted(18);
    for (std::size_t h = 0; h < 3; ++h) {
      double sum = 0.0;
      for (std::size_t i = 0; i < 6; ++i) sum += predicted[h * 6 + i] = u(rng) < 0.2 ? 0.0 : u(rng);
      if (sum == 0.0) predicted[h * 6] = sum = 1.0;
      for (std::size_t i = 0; i < 6; ++i) predicted[h * 6 + i] /= sum;
    }
    CHECK(gof(RatingMatrix(3, 6, counts), predicted).kl_bits >= -1e-12);
  }
}

TEST_CASE("regression half-widths") {
  // p = 0.01 + 0.9 P + noise pattern; check the t-based half-width directly
  const std::vector<double> P{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const std::vector<std::int64_t> c{12, 20, 30, 35, 45, 58};  // proportions c / 200 in column 0
  // one stimulus per row, two responses per stimulus keeps rows valid
  std::vector<std::int64_t> counts;
  std::vector<double> pred;
  for (std::size_t k = 0; k < 6; ++k) {
    counts.push_back(c[k]);
    counts.push_back(100 - c[k]);
    pred.push_back(P[k]);
    pred.push_back(1.0 - P[k]);
  }
  const RatingMatrix m(6, 2, counts);
  const auto r = gof(m, pred);
  // reference OLS by hand
  std::vector<double> x = pred;
  std::vector<double> y = m.proportions();
  const double n = 12.0;
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < 12; ++k) {
    mx += x[k] / n;
    my += y[k] / n;
  }
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < 12; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  const double b1 = sxy / sxx;
  const double b0 = my - b1 * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < 12; ++k) sse += std::pow(y[k] - b0 - b1 * x[k], 2);
  const double s2 = sse / 10.0;
  const double t = 2.2281388519649385;  // 0.975 quantile, 10 dof
  CHECK(r.b1 == doctest::Approx(b1));
  CHECK(r.b0 == doctest::Approx(b0));
  CHECK(r.b1_half_width == doctest::Approx(t * std::sqrt(s2 / sxx)));
  CHECK(r.b0_half_width == doctest::Approx(t * std::sqrt(s2 * (1.0 / n + mx * mx / sxx))));
}

TEST_CASE("quality classes") {
  GofReport g;
  g.rmsd = 0.01;
  g.b0_half_width = 0.005;
  g.b1_half_width = 0.03;
  g.kl_bits = 0.05;
  CHECK(classify(g) == FitQuality::acceptable);
  g.b1_half_width = 0.06;
  CHECK(classify(g) == FitQuality::marginal);
  g.kl_bits = 0.2;
  CHECK(classify(g) == FitQuality::unacceptable);
  CHECK(to_string(FitQuality::marginal) == "marginal");
}

TEST_CASE("rescaling through the origin") {
  const std::vector<double> g{1.0, 2.0, -1.0};
  const std::vector<double> twice{2.0, 4.0, -2.0};
  CHECK(rescale_generating(twice, g).first == doctest::Approx(2.0));
  CHECK(rescale_generating(g, g).first == doctest::Approx(1.0));
  const auto [b, r] = rescale_generating(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 1.0});
  CHECK(b == doctest::Approx(1.5));
  CHECK(r == std::vector<double>{1.5, 1.5});
  CHECK_THROWS_AS(rescale_generating(std::vector<double>{1.0}, std::vector<double>{0.0}), std::invalid_argument);
  CHECK_THROWS_AS(rescale_generating(std::vector<double>{1.0}, g), std::invalid_argument);
}

TEST_CASE("restart consistency") {
  CHECK(consistency(std::vector<double>{-10.0, -10.0, -10.0}, 54).spread_per_dof == 0.0);
  const auto ok = consistency(std::vector<double>{-100.0, -102.6, -101.0}, 54);
  CHECK(ok.spread_per_dof == doctest::Approx(0.0481).epsilon(0.001));
  CHECK(ok.consistent);
  const auto bad = consistency(std::vector<double>{-100.0, -105.4, -101.0}, 54);
  CHECK(bad.spread_per_dof == doctest::Approx(0.1));
  CHECK_FALSE(bad.consistent);
  CHECK_THROWS_AS(consistency(std::vector<double>{1.0}, 0), std::invalid_argument);
  CHECK(rating_dof(RatingMatrix(6, 10)) == 54);
}

TEST_CASE("coverage uses closed intervals") {
  const std::vector<double> rec{0.0, 1.0, 2.0};
  const std::vector<Interval> lim{{-1.0, 1.0}, {1.0, 1.0}, {2.5, 3.0}};
  CHECK(coverage_check(rec, lim, std::vector<double>{0.5, 1.0, 2.0}) == 2);
  CHECK(coverage_check(rec, lim, std::vector<double>{1.0, 1.0, 3.0}) == 3);
}
