#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ifr/bayes.hpp"
#include "ifr/numeric.hpp"
#include "oracles.hpp"

using namespace ifr;

namespace {

const RatioCounts kGangelt(7, 12597, 138, 919);

}  // namespace

TEST_CASE("conjugate beta posterior") {
  auto flat = beta_posterior({0, 10}, BetaParams::flat());
  CHECK(flat.alpha == 1.0);
  CHECK(flat.beta == 11.0);
  CHECK(flat.mean() == doctest::Approx(1.0 / 12));
  CHECK(beta_posterior({0, 10}, BetaParams::jeffreys()).mean() == doctest::Approx(0.5 / 11));
  CHECK(beta_posterior({5, 10}, BetaParams::haldane()).mean() == doctest::Approx(0.5));

  // Sequential updating equals pooled updating.
  for (int ka = 0; ka <= 6; ++ka)
    for (int kb = 0; kb <= 5; ++kb) {
      const auto step = beta_posterior({kb, 9}, beta_posterior({ka, 7}, BetaParams::jeffreys()));
      const auto pooled = beta_posterior({ka + kb, 16}, BetaParams::jeffreys());
      CHECK(step.alpha == pooled.alpha);
      CHECK(step.beta == pooled.beta);
    }
}

TEST_CASE("credible interval of a uniform density") {
  GridDensity d;
  d.grid = num::linspace(0.0, 1.0, 1001);
  d.mass.assign(1001, 1.0);
  d.normalize();
  auto ci = credible_interval(d, 0.95);
  CHECK(ci.ci.lower == doctest::Approx(0.025).epsilon(1e-9));
  CHECK(ci.ci.upper == doctest::Approx(0.975).epsilon(1e-9));
  CHECK(ci.mean == doctest::Approx(0.5));
}

TEST_CASE("gangelt ratio posterior with jeffreys priors") {
  auto d = ratio_posterior(kGangelt, BetaParams::jeffreys(), BetaParams::jeffreys());
  CHECK(d.integral() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(d.tails_covered());
  auto c95 = credible_interval(d, 0.95);
  CHECK_PCT(c95.ci.lower, 0.16, 0.01);
  CHECK_PCT(c95.ci.upper, 0.74, 0.01);
  auto c68 = credible_interval(d, kLevel68);
  CHECK_PCT(c68.ci.lower, 0.25, 0.01);
  CHECK_PCT(c68.ci.upper, 0.54, 0.01);
  CHECK_PCT(c95.mean, 0.40, 0.005);

  // Equal tails.
  const auto cdf = d.cdf();
  CHECK(num::interp_linear(d.grid, cdf, c95.ci.lower) == doctest::Approx(0.025).epsilon(1e-6));
  CHECK(1.0 - num::interp_linear(d.grid, cdf, c95.ci.upper) == doctest::Approx(0.025).epsilon(1e-6));
}

TEST_CASE("flat-prior mode sits at the ML estimate") {
  auto d = ratio_posterior(kGangelt, BetaParams::flat(), BetaParams::flat());
  const double mode = d.mode();
  const auto it = std::lower_bound(d.grid.begin(), d.grid.end(), mode);
  const double step = *(it + 1) - *it;
  INFO("mode % = " << 100 * mode);
  CHECK(std::abs(std::round(mode * 1e4) / 1e4 - 0.0037) <= step);
  // Flat priors give slightly larger values than Jeffreys.
  auto j = ratio_posterior(kGangelt, BetaParams::jeffreys(), BetaParams::jeffreys());
  CHECK(d.mean() > j.mean());
}

TEST_CASE("symmetric counts give median one") {
  auto d = ratio_posterior({20, 200, 20, 200}, BetaParams::jeffreys(), BetaParams::jeffreys());
  const auto ci = credible_interval(d, 0.95);
  CHECK(ci.median == doctest::Approx(1.0).epsilon(2e-3));
  // r -> 1/r symmetry: quantiles are reciprocal.
  CHECK(ci.ci.lower * ci.ci.upper == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("grid convergence") {
  GridSpec coarse, fine;
  coarse.points = 2048;
  fine.points = 4096;
  auto a = credible_interval(ratio_posterior(kGangelt, BetaParams::jeffreys(), BetaParams::jeffreys(), coarse), 0.95);
  auto b = credible_interval(ratio_posterior(kGangelt, BetaParams::jeffreys(), BetaParams::jeffreys(), fine), 0.95);
  CHECK(std::abs(a.ci.lower - b.ci.lower) < 1e-4 * b.ci.lower);
  CHECK(std::abs(a.ci.upper - b.ci.upper) < 1e-4 * b.ci.upper);
}

TEST_CASE("ratio density matches sampling from the joint posterior") {
  const RatioCounts c(2, 50, 5, 40);
  auto d = ratio_posterior(c, BetaParams::flat(), BetaParams::flat());
  // Beta draws as gamma ratios; histogram r.
  std::mt19937_64 gen(2024);
  std::gamma_distribution<double> g1a(3.0), g1b(49.0), g2a(6.0), g2b(36.0);
  const int bins = 150;
  const double r_max = 3.0, width = r_max / bins;
  std::vector<double> hist(bins, 0.0);
  const long draws = 8000000;
  for (long i = 0; i < draws; ++i) {
    const double x1 = g1a(gen), p1 = x1 / (x1 + g1b(gen));
    const double x2 = g2a(gen), p2 = x2 / (x2 + g2b(gen));
    const double r = p1 / p2;
    if (r < r_max) hist[static_cast<int>(r / width)] += 1.0;
  }
  double peak = 0.0, worst = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double est = hist[b] / (draws * width);
    // Bin-average of the grid density.
    const double lo = b * width, hi = lo + width;
    double avg = 0.0;
    for (int s = 0; s < 20; ++s) avg += d.value_at(lo + (s + 0.5) * (hi - lo) / 20) / 20;
    peak = std::max(peak, avg);
    worst = std::max(worst, std::abs(est - avg));
  }
  INFO("sup diff = " << worst << ", peak = " << peak);
  CHECK(worst < 0.02 * peak);
}

TEST_CASE("dressed posterior") {
  GridSpec spec;
  auto plain = ratio_posterior(kGangelt, BetaParams::jeffreys(), BetaParams::jeffreys(), spec);
  auto same = dressed_ratio_posterior(kGangelt, BetaParams::jeffreys(), BetaParams::jeffreys(), {1.0, 0.0},
                                      {1.0, 0.0}, spec);
  REQUIRE(same.grid == plain.grid);
  double diff = 0.0;
  for (std::size_t i = 0; i < plain.mass.size(); ++i) diff = std::max(diff, std::abs(same.mass[i] - plain.mass[i]));
  CHECK(diff < 1e-9);

  auto wide = dressed_ratio_posterior(kGangelt, BetaParams::jeffreys(), BetaParams::jeffreys(), {1.0, 0.0},
                                      {1.0, 0.2}, spec);
  CHECK(credible_interval(wide, 0.95).ci.width() > credible_interval(plain, 0.95).ci.width());

  auto gam = dressed_ratio_posterior(kGangelt, BetaParams::jeffreys(), BetaParams::jeffreys(),
                                     {1.0, 0.0, ScaleFamily::gamma}, {1.0, 0.2, ScaleFamily::gamma}, spec);
  CHECK(credible_interval(gam, 0.95).ci.width() > credible_interval(plain, 0.95).ci.width());

  Diagnostics diag;
  dressed_ratio_posterior(kGangelt, BetaParams::jeffreys(), BetaParams::jeffreys(), {1.0, 0.6}, {1.0, 0.0}, spec,
                          &diag);
  CHECK(diag.warnings.size() == 1);
}

TEST_CASE("explicit grid too narrow is reported") {
  GridSpec spec;
  spec.r_min = 0.003;
  spec.r_max = 0.004;
  CHECK_THROWS_AS(ratio_posterior(kGangelt, BetaParams::jeffreys(), BetaParams::jeffreys(), spec), NumericError);
}

TEST_CASE("density csv") {
  GridDensity d;
  d.grid = {1.0, 2.0};
  d.mass = {0.5, 0.5};
  std::ostringstream os;
  write_density_csv(os, d);
  CHECK(os.str() == "r,density\n1,0.5\n2,0.5\n");
}
