#pragma once

// Independent reference computations for the tests. Deliberately naive:
// direct summation with std::lgamma, plain bisection, no library code.

#include <cmath>

namespace oracle {

inline double pmf(int k, int n, double p) {
  if (k < 0 || k > n) return 0.0;
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                  (n - k) * std::log1p(-p));
}

inline double tail_ge(int k, int n, double p) {
  double s = 0.0;
  for (int j = k; j <= n; ++j) s += pmf(j, n, p);
  return s;
}

inline double tail_le(int k, int n, double p) {
  double s = 0.0;
  for (int j = 0; j <= k; ++j) s += pmf(j, n, p);
  return s;
}

template <class F>
double bisect_increasing(F f, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (f(m) < 0 ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

// Smallest p with P(X >= k) >= a.
inline double cp_lower(int k, int n, double a) {
  return bisect_increasing([&](double p) { return tail_ge(k, n, p) - a; }, 0.0, 1.0);
}

// Largest p with P(X <= k) >= a.
inline double cp_upper(int k, int n, double a) {
  return bisect_increasing([&](double p) { return a - tail_le(k, n, p); }, 0.0, 1.0);
}

inline double llr(int k, int n, double p) {
  const double ph = static_cast<double>(k) / n;
  double s = 0.0;
  if (k > 0) s += k * std::log(ph / p);
  if (k < n) s += (n - k) * std::log((1 - ph) / (1 - p));
  return 2.0 * s;
}

}  // namespace oracle

// Percent value within an absolute tolerance in percentage points.
#define CHECK_PCT(x, target, tol)                \
  do {                                           \
    const double pct_ = 100.0 * (x);             \
    INFO("percent = " << pct_ << ", target = " << (target)); \
    CHECK(std::abs(pct_ - (target)) <= (tol));   \
  } while (0)
