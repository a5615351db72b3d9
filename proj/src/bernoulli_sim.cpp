#include "ifr/bernoulli_sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "ifr/common.hpp"
#include "ifr/numeric.hpp"
#include "ifr/rng.hpp"

namespace ifr {

namespace {

void check_moments(double e_x, double e_y) {
  if (!(e_x > 0.0 && e_x < 1.0 && e_y > 0.0 && e_y < 1.0))
    throw ValidationError("Bernoulli means must lie in (0, 1)");
}

double coupling_scale(double e_x, double e_y) { return std::sqrt(e_x * e_y * (1.0 - e_x) * (1.0 - e_y)); }

}  // namespace

RhoRange admissible_rho(double e_x, double e_y) {
  check_moments(e_x, e_y);
  const double s = coupling_scale(e_x, e_y);
  const double p3_min = std::max(0.0, e_x + e_y - 1.0);
  const double p3_max = std::min(e_x, e_y);
  return {(p3_min - e_x * e_y) / s, (p3_max - e_x * e_y) / s};
}

double max_coupling(double e_x, double e_y) { return admissible_rho(e_x, e_y).max; }

Bernoulli2DParams corners_from_moments(double e_x, double e_y, double rho) {
  const auto range = admissible_rho(e_x, e_y);
  constexpr double kEdge = 1e-12;
  if (rho < range.min - kEdge || rho > range.max + kEdge) {
    std::ostringstream msg;
    msg << "correlation " << rho << " is not admissible; allowed range [" << range.min << ", " << range.max << "]";
    throw ValidationError(msg.str());
  }
  Bernoulli2DParams p;
  p.e_x = e_x;
  p.e_y = e_y;
  p.rho = rho;
  p.p3 = rho * coupling_scale(e_x, e_y) + e_x * e_y;
  if (std::abs(rho - range.max) <= kEdge) p.p3 = std::min(e_x, e_y);
  if (std::abs(rho - range.min) <= kEdge) p.p3 = std::max(0.0, e_x + e_y - 1.0);
  p.p2 = e_x - p.p3;
  p.p1 = e_y - p.p3;
  p.p0 = 1.0 - p.p1 - p.p2 - p.p3;
  for (double* q : {&p.p0, &p.p1, &p.p2, &p.p3}) *q = std::clamp(*q, 0.0, 1.0);
  return p;
}

namespace {

// One population: counts of the 8 (T, I, F) categories.
std::array<std::int32_t, kCategories> simulate_one(const PopulationSimConfig& cfg, const Bernoulli2DParams& c,
                                                   Philox& rng) {
  // (I, F) corners: index 2I + F.
  std::array<std::int64_t, 4> corner{};
  std::int64_t left = cfg.n_p;
  double mass = 1.0;
  const std::array<double, 4> prob{c.p0, c.p1, c.p2, c.p3};
  for (int j = 3; j > 0; --j) {
    const double q = mass > 0.0 ? std::min(1.0, prob[j] / mass) : 0.0;
    corner[j] = sample_binomial(rng, left, q);
    left -= corner[j];
    mass -= prob[j];
  }
  corner[0] = left;

  std::array<std::int64_t, 4> tested{};
  if (cfg.fluctuate_test_count) {
    for (int j = 0; j < 4; ++j) tested[j] = sample_binomial(rng, corner[j], cfg.mean_t);
  } else {
    std::int64_t pool = cfg.n_p, draws = cfg.n_t;
    for (int j = 3; j > 0; --j) {
      tested[j] = sample_hypergeometric(rng, pool, corner[j], draws);
      pool -= corner[j];
      draws -= tested[j];
    }
    tested[0] = draws;
  }
  std::array<std::int32_t, kCategories> out{};
  for (int j = 0; j < 4; ++j) {
    out[4 + j] = static_cast<std::int32_t>(tested[j]);
    out[j] = static_cast<std::int32_t>(corner[j] - tested[j]);
  }
  return out;
}

QuantileRange quantile_range(const std::vector<double>& sorted, double level) {
  const double a2 = 0.5 * (1.0 - level);
  return {num::nearest_rank_quantile(sorted, a2), num::nearest_rank_quantile(sorted, 1.0 - a2)};
}

}  // namespace

CategoryStats run_population_sim(const PopulationSimConfig& cfg, Exec exec) {
  if (cfg.n_p < 1 || cfg.n_t < 0 || cfg.n_t > cfg.n_p) throw ValidationError("simulation needs 0 <= n_t <= n_p");
  if (cfg.n_mc < 1) throw ValidationError("simulation needs n_mc >= 1");
  if (!(cfg.mean_t >= 0.0 && cfg.mean_t <= 1.0)) throw ValidationError("mean_t must lie in [0, 1]");
  const double rho = cfg.rho_if < 0.0 ? max_coupling(cfg.mean_i, cfg.mean_f) : cfg.rho_if;
  const auto corners = corners_from_moments(cfg.mean_i, cfg.mean_f, rho);
  if (corners.p1 != 0.0)
    throw ValidationError("coupling must forbid fatalities without infection (P(I=0, F=1) = 0)");

  std::vector<std::int32_t> counts(static_cast<std::size_t>(cfg.n_mc) * kCategories);
  for_each_index(exec, cfg.n_mc, [&](std::int64_t run) {
    Philox rng(cfg.seed, static_cast<std::uint64_t>(run));
    const auto row = simulate_one(cfg, corners, rng);
    std::copy(row.begin(), row.end(), counts.begin() + run * kCategories);
  });
  return summarize_categories(std::move(counts), cfg.n_mc);
}

CategoryStats summarize_categories(std::vector<std::int32_t> counts, std::int64_t n_mc) {
  if (static_cast<std::int64_t>(counts.size()) != n_mc * kCategories)
    throw ValidationError("category matrix must have n_mc x 8 entries");
  CategoryStats st;
  st.n_mc = n_mc;
  st.counts = std::move(counts);
  const auto at = [&](std::int64_t r, int c) { return st.counts[static_cast<std::size_t>(r * kCategories + c)]; };

  std::vector<double> col(static_cast<std::size_t>(n_mc));
  for (int c = 0; c < kCategories; ++c) {
    double sum = 0.0;
    for (std::int64_t r = 0; r < n_mc; ++r) {
      col[static_cast<std::size_t>(r)] = at(r, c);
      sum += at(r, c);
    }
    st.mean[c] = sum / static_cast<double>(n_mc);
    std::sort(col.begin(), col.end());
    st.q68[c] = quantile_range(col, kLevel68);
    st.q95[c] = quantile_range(col, 0.95);
  }

  st.ifr_full.reserve(static_cast<std::size_t>(n_mc));
  st.ifr_extrapolated.reserve(static_cast<std::size_t>(n_mc));
  for (std::int64_t r = 0; r < n_mc; ++r) {
    // Index = 4T + 2I + F.
    const double inf_total = at(r, 2) + at(r, 3) + at(r, 6) + at(r, 7);
    const double fat_total = at(r, 1) + at(r, 3) + at(r, 5) + at(r, 7);
    const double tested = at(r, 4) + at(r, 5) + at(r, 6) + at(r, 7);
    const double tested_inf = at(r, 6) + at(r, 7);
    const double pop = inf_total + at(r, 0) + at(r, 1) + at(r, 4) + at(r, 5);
    if (inf_total > 0)
      st.ifr_full.push_back(fat_total / inf_total);
    else
      ++st.excluded_full;
    if (tested_inf > 0)
      st.ifr_extrapolated.push_back((fat_total / pop) / (tested_inf / tested));
    else
      ++st.excluded_extrapolated;
  }
  return st;
}

std::vector<std::int64_t> observed_test_positives(const CategoryStats& stats, double v, double s, std::uint64_t seed,
                                                  Exec exec) {
  if (!(v >= 0.0 && v <= 1.0 && s >= 0.0 && s <= 1.0)) throw ValidationError("v and s must lie in [0, 1]");
  std::vector<std::int64_t> out(static_cast<std::size_t>(stats.n_mc));
  for_each_index(exec, stats.n_mc, [&](std::int64_t r) {
    Philox rng(seed, static_cast<std::uint64_t>(r));
    const auto row = stats.counts.begin() + r * kCategories;
    const std::int64_t infected = row[6] + row[7], healthy = row[4] + row[5];
    out[static_cast<std::size_t>(r)] = sample_binomial(rng, infected, v) + sample_binomial(rng, healthy, 1.0 - s);
  });
  return out;
}

void write_category_csv(std::ostream& os, const CategoryStats& stats) {
  os << "000,001,010,011,100,101,110,111\n";
  for (std::int64_t r = 0; r < stats.n_mc; ++r) {
    for (int c = 0; c < kCategories; ++c) {
      if (c) os << ',';
      os << stats.counts[static_cast<std::size_t>(r * kCategories + c)];
    }
    os << '\n';
  }
}

}  // namespace ifr
