#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ifr {

/// Input rejected before any numerics ran (bad counts, malformed files, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numeric procedure failed to produce a result (no convergence, empty belt
/// union, underflowing normalization, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// k successes in n trials.
struct CountPair {
  std::int64_t k = 0;
  std::int64_t n = 1;

  CountPair() = default;
  CountPair(std::int64_t k_, std::int64_t n_) : k(k_), n(n_) {
    if (n < 1) throw ValidationError("CountPair: n must be >= 1");
    if (k < 0 || k > n) throw ValidationError("CountPair: require 0 <= k <= n");
  }

  double p_hat() const { return static_cast<double>(k) / static_cast<double>(n); }
};

/// Four-count double ratio input: r = (k1/n1) / (k2/n2).
/// For the IFR, k1 = deaths, n1 = population, k2 = positive tests, n2 = tests.
struct RatioCounts {
  double k1 = 0;
  double n1 = 1;
  double k2 = 0;
  double n2 = 1;

  RatioCounts() = default;
  RatioCounts(double k1_, double n1_, double k2_, double n2_)
      : k1(k1_), n1(n1_), k2(k2_), n2(n2_) {
    if (n1 < 1 || n2 < 1) throw ValidationError("RatioCounts: n1, n2 must be >= 1");
    if (k1 < 0 || k1 > n1 || k2 < 0 || k2 > n2)
      throw ValidationError("RatioCounts: require 0 <= k_i <= n_i");
  }

  double p1() const { return k1 / n1; }
  double p2() const { return k2 / n2; }
  double r_hat() const { return p1() / p2(); }
};

/// Two-sided interval with its central value. Probability-valued for single
/// binomial methods, ratio-valued for the ratio estimators.
struct IntervalEstimate {
  double lower = 0;
  double upper = 0;
  double level = 0.95;
  double point = 0;
  std::string method;

  // Wald may report endpoints outside [0,1]; physical == false flags that.
  bool physical = true;
  // Belt inversion: union of accepted parameter points had holes.
  bool contiguous = true;
  // Conditional ratio with k2 == 0: upper endpoint is +inf.
  bool upper_unbounded = false;

  double width() const { return upper - lower; }
  bool contains(double x) const { return lower <= x && x <= upper; }
};

/// Two-sided normal quantile z such that P(|Z| <= z) = level.
double z_for_level(double level);

/// 1-dof chi-square quantile at `level` (equals z_for_level(level)^2).
double chi2_1_quantile(double level);

/// Probability mass within +-1 sigma of a normal; the conventional "68%".
inline constexpr double kLevel68 = 0.68268949213708585;

void check_level(double level);

/// Non-fatal warnings collected by a computation.
struct Diagnostics {
  std::vector<std::string> warnings;
};

}  // namespace ifr
