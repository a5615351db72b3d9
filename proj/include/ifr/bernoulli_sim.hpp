#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ifr/parallel.hpp"

namespace ifr {

/// Two correlated Bernoulli coins in the corner basis:
/// p0 = P(0,0), p1 = P(x=0,y=1), p2 = P(x=1,y=0), p3 = P(1,1).
struct Bernoulli2DParams {
  double e_x = 0.0;
  double e_y = 0.0;
  double rho = 0.0;
  double p0 = 1.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
};

struct RhoRange {
  double min = 0.0;
  double max = 0.0;
};

/// Admissible correlation range keeping every corner in [0, 1].
RhoRange admissible_rho(double e_x, double e_y);

/// Largest admissible correlation.
double max_coupling(double e_x, double e_y);

/// Corner probabilities from the two means and their correlation. At the
/// upper end of the range the corner that must vanish is set to exactly 0.
Bernoulli2DParams corners_from_moments(double e_x, double e_y, double rho);

struct PopulationSimConfig {
  std::int64_t n_p = 12597;  // population
  std::int64_t n_t = 919;    // tested
  double mean_t = 919.0 / 12597.0;
  double mean_i = 138.0 / 919.0;
  double mean_f = 7.0 / 12597.0;
  double rho_if = -1.0;  // < 0: use the maximum coupling
  std::int64_t n_mc = 1000000;
  std::uint64_t seed = 0;
  // Draw T per person with probability mean_t instead of fixing n_t.
  bool fluctuate_test_count = false;
};

/// Categories are indexed by 4T + 2I + F.
inline constexpr int kCategories = 8;

struct QuantileRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct CategoryStats {
  std::int64_t n_mc = 0;
  // Row-major n_mc x 8 counts, one row per simulated population.
  std::vector<std::int32_t> counts;
  std::array<double, kCategories> mean{};
  std::array<QuantileRange, kCategories> q68{};
  std::array<QuantileRange, kCategories> q95{};
  // Fatalities over infections in the whole population.
  std::vector<double> ifr_full;
  // Population fatality rate over the test-sample infection rate.
  std::vector<double> ifr_extrapolated;
  std::int64_t excluded_full = 0;          // populations with no infections
  std::int64_t excluded_extrapolated = 0;  // test samples with no infections
};

CategoryStats run_population_sim(const PopulationSimConfig& cfg, Exec exec = Exec::parallel);

/// Re-derive every statistic from the count matrix alone.
CategoryStats summarize_categories(std::vector<std::int32_t> counts, std::int64_t n_mc);

/// Observed positives among the tested in each population when each test
/// has sensitivity v and specificity s.
std::vector<std::int64_t> observed_test_positives(const CategoryStats& stats, double v, double s, std::uint64_t seed,
                                                  Exec exec = Exec::parallel);

/// CSV with header "000,001,...,111" and one row per population.
void write_category_csv(std::ostream& os, const CategoryStats& stats);

}  // namespace ifr
