#include <doctest.h>

#include <cmath>
#include <vector>

#include "ifr/interval.hpp"
#include "oracles.hpp"

using namespace ifr;

TEST_CASE("wald interval") {
  auto e = wald_interval({7, 1892}, 0.95);
  CHECK_PCT(e.lower, 0.10, 0.01);
  CHECK_PCT(e.upper, 0.64, 0.01);
  CHECK(e.physical);

  auto z = wald_interval({0, 10}, 0.95);
  CHECK(z.lower == 0.0);
  CHECK(z.upper == 0.0);

  auto h = wald_interval({50, 100}, kLevel68);
  CHECK(h.lower == doctest::Approx(0.45).epsilon(1e-9));
  CHECK(h.upper == doctest::Approx(0.55).epsilon(1e-9));

  auto neg = wald_interval({1, 20}, 0.95);
  CHECK(neg.lower < 0.0);
  CHECK_FALSE(neg.physical);
}

TEST_CASE("wilson interval") {
  auto e = wilson_interval({7, 1892}, 0.95);
  CHECK_PCT(e.lower, 0.18, 0.01);
  CHECK_PCT(e.upper, 0.76, 0.01);
  CHECK(e.point == doctest::Approx((7 + 0.5 * 1.959963984540054 * 1.959963984540054) /
                                   (1892 + 1.959963984540054 * 1.959963984540054)));
  CHECK(wilson_interval({0, 10}, 0.95).lower == 0.0);
}

TEST_CASE("clopper-pearson interval") {
  auto e = clopper_pearson_interval({7, 1892}, 0.95);
  CHECK_PCT(e.lower, 0.15, 0.01);
  CHECK_PCT(e.upper, 0.76, 0.01);

  auto full = clopper_pearson_interval({10, 10}, 0.95);
  CHECK(full.lower == doctest::Approx(std::pow(0.025, 0.1)).epsilon(1e-12));
  CHECK(full.lower == doctest::Approx(0.6915).epsilon(1e-4));
  CHECK(full.upper == 1.0);

  auto zero = clopper_pearson_interval({0, 12}, 0.9);
  CHECK(zero.lower == 0.0);
  CHECK(zero.upper == doctest::Approx(1.0 - std::pow(0.05, 1.0 / 12)).epsilon(1e-12));

  // Independent oracle: bisection on directly summed tails.
  for (int k = 1; k < 5; ++k) {
    auto cp = clopper_pearson_interval({k, 5}, 0.95);
    CHECK(cp.lower == doctest::Approx(oracle::cp_lower(k, 5, 0.025)).epsilon(1e-8));
    CHECK(cp.upper == doctest::Approx(oracle::cp_upper(k, 5, 0.025)).epsilon(1e-8));
  }
}

TEST_CASE("mid-p interval") {
  auto e = midp_interval({3, 10}, 0.95);
  // Brute-force scan on a 1e-6 grid.
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i <= 1000000; ++i) {
    const double p = i * 1e-6;
    const double up = 0.5 * oracle::pmf(3, 10, p) + oracle::tail_ge(4, 10, p);
    const double dn = 0.5 * oracle::pmf(3, 10, p) + oracle::tail_le(2, 10, p);
    if (up >= 0.025 && dn >= 0.025) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  }
  CHECK(std::abs(e.lower - lo) <= 1.01e-6);
  CHECK(std::abs(e.upper - hi) <= 1.01e-6);

  CHECK(midp_interval({0, 10}, 0.95).lower == 0.0);
  CHECK(midp_interval({10, 10}, 0.95).upper == 1.0);
}

TEST_CASE("mid-p nested in clopper-pearson, exhaustive n <= 100") {
  for (int n = 2; n <= 100; ++n)
    for (int k = 1; k < n; ++k) {
      auto m = midp_interval({k, n}, 0.95);
      auto c = clopper_pearson_interval({k, n}, 0.95);
      REQUIRE(m.lower > c.lower);
      REQUIRE(m.upper < c.upper);
    }
}

TEST_CASE("llr asymptotic interval") {
  auto e = llr_interval_asymptotic({7, 1892}, 0.95);
  CHECK_PCT(e.lower, 0.16, 0.01);
  CHECK_PCT(e.upper, 0.72, 0.01);

  auto m = llr_interval_asymptotic({5, 10}, 0.5);
  CHECK(m.contains(0.5));
  CHECK(binomial_llr(5, 10, 0.5) == 0.0);

  // Grid scan for where the statistic crosses 3.841.
  auto g = llr_interval_asymptotic({2, 20}, 0.95);
  double lo = 1.0, hi = 0.0;
  for (int i = 1; i < 1000000; ++i) {
    const double p = i * 1e-6;
    if (oracle::llr(2, 20, p) <= 3.841458820694124) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  }
  CHECK(std::abs(g.lower - lo) <= 1.01e-6);
  CHECK(std::abs(g.upper - hi) <= 1.01e-6);

  auto z = llr_interval_asymptotic({0, 15}, 0.95);
  CHECK(z.lower == 0.0);
  CHECK(oracle::llr(0, 15, z.upper) == doctest::Approx(3.841458820694124).epsilon(1e-8));
}

TEST_CASE("every method contains its point, exhaustive n <= 50") {
  for (auto m : {BinomialMethod::wald, BinomialMethod::wilson, BinomialMethod::clopper_pearson,
                 BinomialMethod::midp, BinomialMethod::llr})
    for (int n = 1; n <= 50; ++n)
      for (int k = 0; k <= n; ++k)
        for (double level : {kLevel68, 0.95}) {
          auto e = binomial_interval(m, {k, n}, level);
          REQUIRE(e.lower <= e.point);
          REQUIRE(e.point <= e.upper);
          if (m != BinomialMethod::wald) {
            REQUIRE(e.lower >= 0.0);
            REQUIRE(e.upper <= 1.0);
          }
        }
}

TEST_CASE("clopper-pearson exact coverage") {
  for (int n : {10, 100, 1000}) {
    std::vector<IntervalEstimate> ci;
    for (int k = 0; k <= n; ++k) ci.push_back(clopper_pearson_interval({k, n}, 0.95));
    for (int i = 0; i <= 1000; ++i) {
      const double p = i * 1e-3;
      double cov = 0.0;
      for (int k = 0; k <= n; ++k)
        if (ci[k].contains(p)) cov += oracle::pmf(k, n, p);
      REQUIRE(cov >= 0.95 - 1e-12);
    }
  }
}

TEST_CASE("wilson and llr reflect under k -> n-k") {
  for (auto m : {BinomialMethod::wilson, BinomialMethod::llr})
    for (int n : {7, 30, 101})
      for (int k = 0; k <= n; ++k) {
        auto a = binomial_interval(m, {k, n}, 0.95);
        auto b = binomial_interval(m, {n - k, n}, 0.95);
        CHECK(a.lower == doctest::Approx(1.0 - b.upper).epsilon(1e-10));
        CHECK(a.upper == doctest::Approx(1.0 - b.lower).epsilon(1e-10));
      }
}

TEST_CASE("endpoints monotone in k") {
  // Wald is excluded: its zero-width interval at k = 0 sits above the
  // negative lower endpoint at k = 1.
  for (auto m : {BinomialMethod::wilson, BinomialMethod::clopper_pearson, BinomialMethod::midp,
                 BinomialMethod::llr})
    for (int n : {5, 40, 200}) {
      auto prev = binomial_interval(m, {0, n}, 0.95);
      for (int k = 1; k <= n; ++k) {
        auto cur = binomial_interval(m, {k, n}, 0.95);
        REQUIRE(cur.lower >= prev.lower);
        REQUIRE(cur.upper >= prev.upper);
        prev = cur;
      }
    }
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(CountPair(3, 2), ValidationError);
  CHECK_THROWS_AS(CountPair(0, 0), ValidationError);
  CHECK_THROWS_AS(wilson_interval({1, 2}, 1.0), ValidationError);
  CHECK_THROWS_AS(parse_binomial_method("nope"), ValidationError);
}

TEST_CASE("belt: point mass at theta = 0 and asymptotic threshold") {
  BeltConfig cfg;
  cfg.n = 919;
  cfg.ordering = BeltOrdering::llr_asymptotic;
  cfg.grid_size = 200;
  auto belt = build_neyman_belt(cfg);
  REQUIRE(belt.acceptance_sets.front() == std::vector<std::int64_t>{0});
  for (double t : belt.threshold) CHECK(t == belt.threshold.front());
  CHECK(belt.threshold.front() == doctest::Approx(3.841458820694124));

  cfg.ordering = BeltOrdering::llr_exact;
  cfg.mc_samples = 10000;
  auto mc = build_neyman_belt(cfg);
  CHECK(mc.acceptance_sets.front() == std::vector<std::int64_t>{0});
}

TEST_CASE("belt: central-pdf inversion reproduces clopper-pearson") {
  BeltConfig cfg;
  cfg.n = 20;
  cfg.ordering = BeltOrdering::central_pdf;
  cfg.grid_size = 2000;
  auto belt = build_neyman_belt(cfg);
  const double step = belt.param_grid[1] - belt.param_grid[0];
  for (std::size_t i = 0; i < belt.param_grid.size(); ++i) REQUIRE(belt.acceptance_prob[i] >= 0.95 - 1e-12);
  for (int k = 0; k <= 20; ++k) {
    auto b = invert_belt(belt, k);
    auto cp = clopper_pearson_interval({k, 20}, 0.95);
    CHECK(std::abs(b.lower - cp.lower) <= step);
    CHECK(std::abs(b.upper - cp.upper) <= step);
    CHECK(b.contiguous);
  }
}

TEST_CASE("belt: llr-exact acceptance sets and determinism") {
  BeltConfig cfg;
  cfg.n = 50;
  cfg.ordering = BeltOrdering::llr_exact;
  cfg.grid_size = 300;
  cfg.mc_samples = 20000;
  cfg.seed = 12345;
  auto a = build_neyman_belt(cfg, Exec::parallel);
  auto b = build_neyman_belt(cfg, Exec::serial);
  CHECK(a.acceptance_sets == b.acceptance_sets);
  CHECK(a.threshold == b.threshold);
  // The MC cut is exact for the empirical sample; the exact probability may
  // fall short only by MC noise (sd ~ sqrt(0.05 * 0.95 / 20000) ~ 0.0015).
  for (double p : a.acceptance_prob) CHECK(p >= 0.95 - 0.006);

  cfg.seed = 999;
  auto c = build_neyman_belt(cfg);
  CHECK(c.acceptance_sets.size() == a.acceptance_sets.size());

  // Full-cover k on a narrow grid returns the grid range.
  BeltConfig narrow = cfg;
  narrow.param_min = 0.4;
  narrow.param_max = 0.6;
  narrow.grid_size = 100;
  auto nb = build_neyman_belt(narrow);
  auto inv = invert_belt(nb, 25);
  CHECK(inv.lower == 0.4);
  CHECK(inv.upper == doctest::Approx(0.6));
}

TEST_CASE("belt: argument checks") {
  BeltConfig cfg;
  cfg.n = 10;
  cfg.grid_size = 50;
  CHECK_THROWS_AS(build_neyman_belt(cfg), ValidationError);
  cfg.grid_size = 100;
  cfg.mc_samples = 100;
  CHECK_THROWS_AS(build_neyman_belt(cfg), ValidationError);
  cfg.ordering = BeltOrdering::central_pdf;
  auto belt = build_neyman_belt(cfg);
  CHECK_THROWS_AS(invert_belt(belt, 11), ValidationError);
}
