#pragma once

#include "ifr/common.hpp"

namespace ifr {

/// Diagnostic test characteristics with 1-sigma absolute uncertainties.
struct TestCharacteristics {
  double v = 0.892;  // sensitivity
  double s = 0.994;  // specificity
  double sigma_v = 0.02;
  double sigma_s = 0.0014;

  /// Throws unless 0 < v <= 1, 0 < s <= 1, v + s > 1 and sigmas >= 0.
  void validate() const;
  /// Positive-test fraction q for a true prevalence p.
  double forward(double p) const { return p * v + (1.0 - p) * (1.0 - s); }
};

/// (q + s - 1) / (v + s - 1); q must lie in [1 - s, v].
double invert_prevalence(double q, const TestCharacteristics& tc);

/// First-order propagation of independent sigma_q, sigma_s, sigma_v through
/// the inversion.
double propagate_test_error(double q, double sigma_q, const TestCharacteristics& tc);

/// Half-width of the Wilson score interval for a (possibly non-integer)
/// success fraction p over n trials.
double wilson_half_width(double p, double n, double level);

/// Relative systematic scale uncertainty from test errors for an already
/// corrected prevalence p_hat measured on n tests. Sigmas are Wilson 68%
/// half-widths; a negative quadrature difference is clamped to 0.
double renormalize_lambda(double p_hat, double n, const TestCharacteristics& tc, Diagnostics* diag = nullptr);

}  // namespace ifr
