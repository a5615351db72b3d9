#include "ifr/numeric.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "ifr/common.hpp"

namespace ifr {

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
}

double z_for_level(double level) {
  check_level(level);
  return num::normal_quantile(0.5 + 0.5 * level);
}

double chi2_1_quantile(double level) {
  const double z = z_for_level(level);
  return z * z;
}

}  // namespace ifr

namespace ifr::num {

double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, x);
}

double beta_quantile(double a, double b, double p, double tol) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 1100 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (inc_beta(a, b, mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double lgamma(double x) { return boost::math::lgamma(x); }

double log_beta_fn(double a, double b) { return lgamma(a) + lgamma(b) - lgamma(a + b); }

double log_beta_pdf(double x, double a, double b) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (x < 0.0 || x > 1.0) return ninf;
  if (x == 0.0) {
    if (a < 1.0) return std::numeric_limits<double>::infinity();
    if (a > 1.0) return ninf;
  }
  if (x == 1.0) {
    if (b < 1.0) return std::numeric_limits<double>::infinity();
    if (b > 1.0) return ninf;
  }
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta_fn(a, b);
}

double binom_cdf(std::int64_t k, std::int64_t n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  return boost::math::ibetac(static_cast<double>(k + 1), static_cast<double>(n - k), p);
}

double binom_sf(std::int64_t k, std::int64_t n, double p) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return boost::math::ibeta(static_cast<double>(k), static_cast<double>(n - k + 1), p);
}

double binom_log_pmf(std::int64_t k, std::int64_t n, double p) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (k < 0 || k > n) return ninf;
  if (p <= 0.0) return k == 0 ? 0.0 : ninf;
  if (p >= 1.0) return k == n ? 0.0 : ninf;
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  return lgamma(nd + 1) - lgamma(kd + 1) - lgamma(nd - kd + 1) + kd * std::log(p) +
         (nd - kd) * std::log1p(-p);
}

double binom_pmf(std::int64_t k, std::int64_t n, double p) { return std::exp(binom_log_pmf(k, n, p)); }

std::vector<double> binom_pmf_all(std::int64_t n, double p) {
  std::vector<double> out(static_cast<std::size_t>(n + 1), 0.0);
  if (p <= 0.0) {
    out.front() = 1.0;
    return out;
  }
  if (p >= 1.0) {
    out.back() = 1.0;
    return out;
  }
  // Recurrence outward from the mode keeps the terms well scaled.
  const auto mode = std::min<std::int64_t>(n, static_cast<std::int64_t>(std::floor((n + 1) * p)));
  const double ratio = p / (1.0 - p);
  out[mode] = binom_pmf(mode, n, p);
  for (std::int64_t k = mode; k < n; ++k)
    out[k + 1] = out[k] * ratio * static_cast<double>(n - k) / static_cast<double>(k + 1);
  for (std::int64_t k = mode; k > 0; --k)
    out[k - 1] = out[k] / ratio * static_cast<double>(k) / static_cast<double>(n - k + 1);
  return out;
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol, int max_iter) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw NumericError("bisect: interval does not bracket a root");
  for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double expand_bracket(const std::function<double(double)>& f, double lo, double hi, double factor,
                      double limit, int max_steps) {
  const bool sign_lo = f(lo) > 0;
  for (int i = 0; i < max_steps; ++i) {
    if ((f(hi) > 0) != sign_lo) return hi;
    if (hi >= limit) break;
    hi = std::min(limit, hi * factor);
  }
  if ((f(hi) > 0) != sign_lo) return hi;
  throw NumericError("expand_bracket: no sign change found");
}

GaussLegendre::GaussLegendre(int order) : nodes(order), weights(order) {
  if (order < 1) throw ValidationError("GaussLegendre: order must be >= 1");
  const int m = (order + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p2) / j;
      }
      dp = order * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[order - 1 - i] = x;
    weights[i] = weights[order - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return s;
}

std::vector<double> cumulative_trapezoid(std::span<const double> x, std::span<const double> y) {
  std::vector<double> c(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i)
    c[i] = c[i - 1] + 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return c;
}

double interp_linear(std::span<const double> xs, std::span<const double> ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto j = static_cast<std::size_t>(it - xs.begin());
  const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return ys[j - 1] + t * (ys[j] - ys[j - 1]);
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

std::vector<double> logspace(double a, double b, std::size_t n) {
  if (!(a > 0 && b > 0)) throw ValidationError("logspace: bounds must be positive");
  auto v = linspace(std::log(a), std::log(b), n);
  for (auto& x : v) x = std::exp(x);
  return v;
}

double nearest_rank_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw NumericError("quantile of empty sample");
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

}  // namespace ifr::num
