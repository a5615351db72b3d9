#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace ifr::num {

double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b).
double inc_beta(double a, double b, double x);

/// Beta(a, b) quantile by bisection on inc_beta, absolute tolerance `tol`.
double beta_quantile(double a, double b, double p, double tol = 1e-10);

double log_beta_fn(double a, double b);
double lgamma(double x);

/// log Beta(x | a, b) density; -inf outside (0, 1) unless the limit is finite.
double log_beta_pdf(double x, double a, double b);

/// Binomial distribution helpers, exact through the incomplete beta.
double binom_cdf(std::int64_t k, std::int64_t n, double p);  // P(X <= k)
double binom_sf(std::int64_t k, std::int64_t n, double p);   // P(X >= k)
double binom_log_pmf(std::int64_t k, std::int64_t n, double p);
double binom_pmf(std::int64_t k, std::int64_t n, double p);

/// Full pmf vector for k = 0..n.
std::vector<double> binom_pmf_all(std::int64_t n, double p);

/// x * log(y) with the 0 * log(0) = 0 convention.
inline double xlogy(double x, double y) {
  if (x == 0.0) return 0.0;
  return x * std::log(y);
}

/// Bisection for a sign change of f on [lo, hi]. f(lo) and f(hi) must differ
/// in sign (zero counts as either).
double bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
              int max_iter = 300);

/// Expand `hi` geometrically until f(hi) has the sign opposite to f(lo).
/// Returns the bracketing hi, or throws NumericError after max_steps.
double expand_bracket(const std::function<double(double)>& f, double lo, double hi, double factor,
                      double limit, int max_steps = 200);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
  explicit GaussLegendre(int order);

  /// Integrate f over [a, b].
  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(mid + half * nodes[i]);
    return s * half;
  }
};

/// Trapezoid rule over a (possibly non-uniform) grid.
double trapezoid(std::span<const double> x, std::span<const double> y);

/// Cumulative trapezoid, same length as x; first entry 0.
std::vector<double> cumulative_trapezoid(std::span<const double> x, std::span<const double> y);

/// Linear interpolation of (xs, ys) at x, clamped to the end values.
double interp_linear(std::span<const double> xs, std::span<const double> ys, double x);

std::vector<double> linspace(double a, double b, std::size_t n);
std::vector<double> logspace(double a, double b, std::size_t n);  // a, b > 0, geometric spacing

/// Empirical quantile with the nearest-rank ("<=") convention: the smallest
/// sample x with F_n(x) >= q. `sorted` must be ascending.
double nearest_rank_quantile(std::span<const double> sorted, double q);

}  // namespace ifr::num
