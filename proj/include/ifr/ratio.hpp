#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "ifr/common.hpp"
#include "ifr/parallel.hpp"

namespace ifr {

enum class ConditionalBase { cp, midp };

/// Interval from the binomial distribution of k1 conditional on k1 + k2,
/// mapped to the ratio scale by r = (n2/n1) p/(1-p). With k2 = 0 the upper
/// endpoint is +inf and `upper_unbounded` is set.
IntervalEstimate conditional_ratio_interval(const RatioCounts& c, double level, ConditionalBase base);

struct ZeroCellOptions {
  // Add 1/2 to zero success counts (and 1 to the matching trial count)
  // instead of rejecting them.
  bool continuity_correction = false;
};

/// exp(ln r̂ ± z se), se² = 1/k1 - 1/n1 + 1/k2 - 1/n2.
IntervalEstimate katz_log_interval(const RatioCounts& c, double level, ZeroCellOptions opt = {});

/// exp(ln r̂ ± 2 asinh(z se / 2)) with the Katz se.
IntervalEstimate asinh_ratio_interval(const RatioCounts& c, double level, ZeroCellOptions opt = {});

enum class BootstrapVariant { prc, bc, bca };

BootstrapVariant parse_bootstrap_variant(std::string_view name);
std::string to_string(BootstrapVariant v);

struct BootstrapConfig {
  std::int64_t replicates = 1000000;
  BootstrapVariant variant = BootstrapVariant::prc;
  std::uint64_t seed = 0;
  // Overrides for the bias and acceleration constants (testing hooks).
  std::optional<double> z0_override;
  std::optional<double> accel_override;
};

struct BootstrapInterval {
  IntervalEstimate ci;
  std::int64_t discarded = 0;  // resamples with k2* = 0
  double z0 = 0.0;
  double accel = 0.0;
};

/// Parametric bootstrap of r̂ with k_i* ~ Binom(n_i, k_i/n_i).
BootstrapInterval bootstrap_ratio_interval(const RatioCounts& c, double level, const BootstrapConfig& cfg,
                                           Exec exec = Exec::parallel);

/// Jackknife acceleration over the n1 + n2 Bernoulli observations.
double bootstrap_acceleration(const RatioCounts& c);

/// Nuisance maximizer p1*(r0) of the joint likelihood on the line p1 = r0 p2.
double profile_nuisance_root(const RatioCounts& c, double r0);

/// 2 [ln L(p̂1, p̂2) - ln L(p1*, p1*/r0)].
double profile_llr(const RatioCounts& c, double r0);

/// {r0 : profile_llr(r0) <= chi2_1(level)}. Requires k1, k2 >= 1.
IntervalEstimate profile_llr_interval(const RatioCounts& c, double level);

/// Single-binomial reduction (k1, round(n1 k2/n2)) used to compare
/// single-proportion methods on the ratio scale.
CountPair single_binomial_reduction(const RatioCounts& c);

}  // namespace ifr
