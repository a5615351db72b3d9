#include "ifr/testerr.hpp"

#include <cmath>
#include <sstream>

namespace ifr {

void TestCharacteristics::validate() const {
  if (!(v > 0.0 && v <= 1.0)) throw ValidationError("sensitivity must lie in (0, 1]");
  if (!(s > 0.0 && s <= 1.0)) throw ValidationError("specificity must lie in (0, 1]");
  if (!(v + s > 1.0)) throw ValidationError("uninformative test: sensitivity + specificity must exceed 1");
  if (!(sigma_v >= 0.0 && sigma_s >= 0.0)) throw ValidationError("test characteristic uncertainties must be >= 0");
}

double invert_prevalence(double q, const TestCharacteristics& tc) {
  tc.validate();
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("positive fraction q must lie in [0, 1]");
  std::ostringstream msg;
  if (q < 1.0 - tc.s) {
    msg << "ill-posed inversion: q = " << q << " is below the false positive rate 1 - s = " << 1.0 - tc.s;
    throw ValidationError(msg.str());
  }
  if (q > tc.v) {
    msg << "ill-posed inversion: q = " << q << " is above the sensitivity v = " << tc.v;
    throw ValidationError(msg.str());
  }
  return (q + tc.s - 1.0) / (tc.v + tc.s - 1.0);
}

double propagate_test_error(double q, double sigma_q, const TestCharacteristics& tc) {
  tc.validate();
  const double d = tc.v + tc.s - 1.0;
  const double a = q - tc.v, b = q + tc.s - 1.0;
  const double var = (d * d * sigma_q * sigma_q + a * a * tc.sigma_s * tc.sigma_s + b * b * tc.sigma_v * tc.sigma_v) /
                     (d * d * d * d);
  return std::sqrt(var);
}

double wilson_half_width(double p, double n, double level) {
  check_level(level);
  if (!(n > 0.0) || !(p >= 0.0 && p <= 1.0)) throw ValidationError("Wilson width needs n > 0 and p in [0, 1]");
  const double z = z_for_level(level);
  return z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / (1.0 + z * z / n);
}

double renormalize_lambda(double p_hat, double n, const TestCharacteristics& tc, Diagnostics* diag) {
  tc.validate();
  if (!(p_hat > 0.0 && p_hat < 1.0)) throw ValidationError("renormalization needs p_hat in (0, 1)");
  if (!(n >= 1.0)) throw ValidationError("renormalization needs n >= 1");
  const double q = tc.forward(p_hat);
  const double sigma_q = wilson_half_width(q, n, kLevel68);
  const double sigma_tilde = propagate_test_error(q, sigma_q, tc);
  const double sigma_p = wilson_half_width(p_hat, n, kLevel68);
  const double d2 = (sigma_tilde * sigma_tilde - sigma_p * sigma_p) / (p_hat * p_hat);
  if (d2 < 0.0) {
    if (diag) diag->warnings.push_back("test-error renormalization: negative quadrature difference clamped to 0");
    return 0.0;
  }
  return std::sqrt(d2);
}

}  // namespace ifr
