#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ifr/bernoulli_sim.hpp"
#include "ifr/common.hpp"
#include "ifr/rng.hpp"
#include "oracles.hpp"

using namespace ifr;

namespace {

const double kEI = 138.0 / 919.0;
const double kEF = 7.0 / 12597.0;

double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

double variance(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / v.size();
}

}  // namespace

TEST_CASE("corner parametrization") {
  auto p = corners_from_moments(0.5, 0.5, 0.0);
  CHECK(p.p0 == doctest::Approx(0.25));
  CHECK(p.p1 == doctest::Approx(0.25));
  CHECK(p.p2 == doctest::Approx(0.25));
  CHECK(p.p3 == doctest::Approx(0.25));

  auto g = corners_from_moments(kEI, kEF, max_coupling(kEI, kEF));
  CHECK(std::abs(g.p1) <= 1e-12);
  CHECK(g.p0 + g.p1 + g.p2 + g.p3 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.p3 == doctest::Approx(kEF).epsilon(1e-12));

  // Analytic admissible range for (0.3, 0.6).
  const double s = std::sqrt(0.3 * 0.6 * 0.7 * 0.4);
  const double lo = std::max(-0.18, 0.3 + 0.6 - 1.0 - 0.18) / s, hi = (0.3 - 0.18) / s;
  auto r = admissible_rho(0.3, 0.6);
  CHECK(r.min == doctest::Approx(lo));
  CHECK(r.max == doctest::Approx(hi));
  CHECK_THROWS_WITH_AS(corners_from_moments(0.3, 0.6, -1.0), doctest::Contains("allowed range"), ValidationError);
}

TEST_CASE("maximum coupling") {
  CHECK(max_coupling(0.5, 0.5) == doctest::Approx(1.0));
  CHECK(max_coupling(0.9, 0.1) == doctest::Approx(0.01 / 0.09));
  const double closed = std::sqrt(kEF * (1 - kEI) / (kEI * (1 - kEF)));
  CHECK(max_coupling(kEI, kEF) == doctest::Approx(closed).epsilon(1e-12));
  // Printed value 0.0559 comes from rounded inputs; the exact value is 0.05610.
  CHECK(std::abs(max_coupling(kEI, kEF) - 0.0559) < 3e-4);
}

TEST_CASE("hypergeometric sampler matches the exact pmf") {
  const int total = 20, marked = 7, draws = 9, n = 200000;
  std::vector<double> freq(draws + 1, 0.0);
  Philox rng(11, 0);
  for (int i = 0; i < n; ++i) freq[sample_hypergeometric(rng, total, marked, draws)] += 1.0;
  auto choose = [](int a, int b) { return std::exp(std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0)); };
  for (int x = 0; x <= draws; ++x) {
    const double p = x <= marked ? choose(marked, x) * choose(total - marked, draws - x) / choose(total, draws) : 0.0;
    const double sd = std::sqrt(n * p * (1 - p)) + 1e-9;
    CHECK(std::abs(freq[x] - n * p) <= 5 * sd);
  }
}

TEST_CASE("population simulation invariants") {
  PopulationSimConfig cfg;
  cfg.n_mc = 20000;
  cfg.seed = 5;
  auto st = run_population_sim(cfg, Exec::parallel);
  auto ser = run_population_sim(cfg, Exec::serial);
  CHECK(st.counts == ser.counts);

  for (std::int64_t r = 0; r < cfg.n_mc; ++r) {
    const auto row = st.counts.begin() + r * kCategories;
    REQUIRE(row[1] == 0);
    REQUIRE(row[5] == 0);
    REQUIRE(std::accumulate(row, row + kCategories, 0) == cfg.n_p);
    REQUIRE(row[4] + row[5] + row[6] + row[7] == cfg.n_t);
  }
  CHECK(std::accumulate(st.mean.begin(), st.mean.end(), 0.0) == doctest::Approx(12597.0).epsilon(1e-12));

  // Means against exact expectations, 4 standard errors.
  const double t = static_cast<double>(cfg.n_t) / cfg.n_p;
  const double e_cat[8] = {12597 * (1 - kEI) * (1 - t), 0, 12597 * (kEI - kEF) * (1 - t), 12597 * kEF * (1 - t),
                           12597 * (1 - kEI) * t,       0, 12597 * (kEI - kEF) * t,       12597 * kEF * t};
  for (int c = 0; c < kCategories; ++c) {
    double var = 0.0;
    for (std::int64_t r = 0; r < cfg.n_mc; ++r) {
      const double d = st.counts[r * kCategories + c] - st.mean[c];
      var += d * d;
    }
    const double se = std::sqrt(var / cfg.n_mc / cfg.n_mc);
    CHECK(std::abs(st.mean[c] - e_cat[c]) <= 4 * se + 1e-12);
  }

  // The count matrix is a sufficient statistic.
  auto again = summarize_categories(st.counts, st.n_mc);
  CHECK(again.mean == st.mean);
  CHECK(again.ifr_full == st.ifr_full);
  CHECK(again.ifr_extrapolated == st.ifr_extrapolated);
  for (int c = 0; c < kCategories; ++c) {
    CHECK(again.q68[c].lo == st.q68[c].lo);
    CHECK(again.q95[c].hi == st.q95[c].hi);
  }

  // Finite test sample smears the extrapolated estimate.
  CHECK(variance(st.ifr_extrapolated) > variance(st.ifr_full));
}

TEST_CASE("fluctuating test count") {
  PopulationSimConfig cfg;
  cfg.n_mc = 20000;
  cfg.seed = 6;
  cfg.fluctuate_test_count = true;
  auto st = run_population_sim(cfg);
  bool varies = false;
  for (std::int64_t r = 0; r < cfg.n_mc; ++r) {
    const auto row = st.counts.begin() + r * kCategories;
    if (row[4] + row[5] + row[6] + row[7] != cfg.n_t) varies = true;
    REQUIRE(row[1] == 0);
    REQUIRE(row[5] == 0);
  }
  CHECK(varies);
}

TEST_CASE("testing everybody makes the two estimates coincide") {
  PopulationSimConfig cfg;
  cfg.n_mc = 20000;
  cfg.n_t = cfg.n_p;
  cfg.mean_t = 1.0;
  cfg.seed = 9;
  auto st = run_population_sim(cfg);
  CHECK(ks_distance(st.ifr_full, st.ifr_extrapolated) < 3.0 / std::sqrt(cfg.n_mc));
}

TEST_CASE("zero-infection populations are excluded and counted") {
  PopulationSimConfig cfg;
  cfg.n_p = 50;
  cfg.n_t = 10;
  cfg.mean_t = 0.2;
  cfg.mean_i = 0.01;
  cfg.mean_f = 0.005;
  cfg.n_mc = 5000;
  auto st = run_population_sim(cfg);
  CHECK(st.excluded_full > 0);
  CHECK(st.excluded_extrapolated > st.excluded_full);
  CHECK(static_cast<std::int64_t>(st.ifr_full.size()) + st.excluded_full == cfg.n_mc);
}

TEST_CASE("test-error post processing") {
  PopulationSimConfig cfg;
  cfg.n_mc = 1000;
  auto st = run_population_sim(cfg);
  auto perfect = observed_test_positives(st, 1.0, 1.0, 1);
  for (std::int64_t r = 0; r < cfg.n_mc; ++r) CHECK(perfect[r] == st.counts[r * kCategories + 6] + st.counts[r * kCategories + 7]);
  CHECK_THROWS_AS(run_population_sim([] {
                    PopulationSimConfig c;
                    c.rho_if = 0.01;
                    return c;
                  }()),
                  ValidationError);
}
