#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ifr/common.hpp"
#include "ifr/parallel.hpp"

namespace ifr {

/// Normal approximation p̂ ± z sqrt(p̂(1-p̂)/n). Endpoints are not clipped;
/// `physical` is false when they leave [0, 1].
IntervalEstimate wald_interval(const CountPair& c, double level);

/// Wilson score interval. `point` is the score center (k + z²/2)/(n + z²).
IntervalEstimate wilson_interval(const CountPair& c, double level);

/// Exact (Clopper-Pearson) interval from Beta quantiles.
IntervalEstimate clopper_pearson_interval(const CountPair& c, double level);

/// Lancaster mid-P interval: tails count half the probability of the observed k.
IntervalEstimate midp_interval(const CountPair& c, double level);

/// {p0 : 2 ln L(p̂)/L(p0) <= chi2_1(level)}.
IntervalEstimate llr_interval_asymptotic(const CountPair& c, double level);

/// Binomial log-likelihood ratio statistic 2 [ln L(k/n) - ln L(p0)], 0 ln 0 = 0.
double binomial_llr(std::int64_t k, std::int64_t n, double p0);

enum class BinomialMethod { wald, wilson, clopper_pearson, midp, llr };

BinomialMethod parse_binomial_method(std::string_view name);
std::string to_string(BinomialMethod m);
IntervalEstimate binomial_interval(BinomialMethod m, const CountPair& c, double level);

// --- Neyman belt ----------------------------------------------------------

enum class BeltOrdering { llr_exact, llr_asymptotic, central_pdf };

BeltOrdering parse_belt_ordering(std::string_view name);
std::string to_string(BeltOrdering o);

struct BeltConfig {
  std::int64_t n = 0;
  double level = 0.95;
  BeltOrdering ordering = BeltOrdering::llr_exact;
  std::int64_t grid_size = 2000;
  std::int64_t mc_samples = 100000;
  std::uint64_t seed = 0;
  // Parameter range of the grid; narrowing it around the region of interest
  // buys resolution at fixed grid_size.
  double param_min = 0.0;
  double param_max = 1.0;
};

struct ConfidenceBelt {
  std::int64_t n = 0;
  double level = 0.95;
  BeltOrdering ordering = BeltOrdering::llr_exact;
  std::int64_t mc_samples = 0;
  std::uint64_t seed = 0;
  std::vector<double> param_grid;
  // Sorted accepted k values per grid point, stored as produced.
  std::vector<std::vector<std::int64_t>> acceptance_sets;
  // Exact Binom(n, θ0) probability of each acceptance set.
  std::vector<double> acceptance_prob;
  // Cut value on the ordering statistic (NaN for central-pdf).
  std::vector<double> threshold;
};

ConfidenceBelt build_neyman_belt(const BeltConfig& cfg, Exec exec = Exec::parallel);

/// Union of grid points whose acceptance set holds k, reported as
/// [min, max]; `contiguous` is false when the union has holes.
IntervalEstimate invert_belt(const ConfidenceBelt& belt, std::int64_t k);

}  // namespace ifr
