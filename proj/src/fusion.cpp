#include "ifr/fusion.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ifr/numeric.hpp"
#include "ifr/ratio.hpp"

namespace ifr {

SeReduction parse_se_reduction(std::string_view name) {
  if (name == "cr68" || name == "cr68_half_width") return SeReduction::cr68_half_width;
  if (name == "sd" || name == "posterior_sd") return SeReduction::posterior_sd;
  throw ValidationError("unknown standard-error reduction: " + std::string(name));
}

StudyEstimate estimate_from_density(std::string name, const GridDensity& d, SeReduction red) {
  StudyEstimate e;
  e.name = std::move(name);
  e.r = d.mean();
  if (red == SeReduction::cr68_half_width) {
    const double a = 0.5 * (1.0 - kLevel68);
    e.s = 0.5 * (d.quantile(1.0 - a) - d.quantile(a));
  } else {
    std::vector<double> m2(d.grid.size());
    for (std::size_t i = 0; i < d.grid.size(); ++i) m2[i] = (d.grid[i] - e.r) * (d.grid[i] - e.r) * d.mass[i];
    e.s = std::sqrt(num::trapezoid(d.grid, m2) / d.integral());
  }
  return e;
}

namespace {

void check_estimates(const std::vector<StudyEstimate>& est) {
  if (est.empty()) throw ValidationError("combination needs at least one estimate");
  for (const auto& e : est) {
    if (!(e.s > 0.0) || !std::isfinite(e.s)) throw ValidationError("study " + e.name + ": s_j must be > 0");
    if (!std::isfinite(e.r)) throw ValidationError("study " + e.name + ": r_j must be finite");
    if (!(e.w >= 0.0) || !std::isfinite(e.w)) throw ValidationError("study " + e.name + ": weight must be finite, >= 0");
  }
}

void fill_gaussian(RandomEffectsFit& f) {
  for (auto [ci, level] : {std::pair{&f.q68, kLevel68}, {&f.q95, 0.95}}) {
    const double h = z_for_level(level) * f.se_r;
    ci->lower = f.r_hat - h;
    ci->upper = f.r_hat + h;
    ci->level = level;
    ci->point = f.r_hat;
    ci->method = f.method;
  }
}

RandomEffectsFit passthrough(const std::vector<StudyEstimate>& est, const char* method, Diagnostics* diag) {
  RandomEffectsFit f;
  f.method = method;
  f.r_hat = est[0].r;
  f.se_r = est[0].s;
  if (diag) diag->warnings.push_back(std::string(method) + ": single study passed through with zero heterogeneity");
  fill_gaussian(f);
  return f;
}

// Maximize f on [a, b]: coarse scan, then golden-section refinement.
template <class F>
double maximize_1d(F&& f, double a, double b, int scan = 200) {
  double best_x = a, best = f(a);
  for (int i = 1; i <= scan; ++i) {
    const double x = a + (b - a) * i / scan;
    const double v = f(x);
    if (v > best) best = v, best_x = x;
  }
  const double step = (b - a) / scan;
  double lo = std::max(a, best_x - step), hi = std::min(b, best_x + step);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2, f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1, f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    }
  }
  const double mid = 0.5 * (lo + hi);
  return f(mid) >= best ? mid : best_x;
}

double weighted_mean_at(const std::vector<StudyEstimate>& est, double delta_sq, double* wsum = nullptr) {
  double sw = 0.0, swr = 0.0;
  for (const auto& e : est) {
    const double w = 1.0 / (e.s * e.s + delta_sq);
    sw += w;
    swr += w * e.r;
  }
  if (wsum) *wsum = sw;
  return swr / sw;
}

}  // namespace

RandomEffectsFit mom_combine(const std::vector<StudyEstimate>& est, Diagnostics* diag) {
  check_estimates(est);
  if (est.size() == 1) return passthrough(est, "MoM", diag);
  RandomEffectsFit f;
  f.method = "MoM";
  double delta_sq = 0.0;
  std::vector<double> w(est.size());
  for (std::size_t j = 0; j < est.size(); ++j) w[j] = 1.0 / (est[j].s * est[j].s);
  double min_s2 = std::numeric_limits<double>::infinity();
  for (const auto& e : est) min_s2 = std::min(min_s2, e.s * e.s);
  for (int it = 1; it <= 1000; ++it) {
    double sw = 0.0, sw2 = 0.0, swr = 0.0, sws2 = 0.0, sw2s2 = 0.0;
    for (std::size_t j = 0; j < est.size(); ++j) {
      const double s2 = est[j].s * est[j].s;
      sw += w[j];
      sw2 += w[j] * w[j];
      swr += w[j] * est[j].r;
      sws2 += w[j] * s2;
      sw2s2 += w[j] * w[j] * s2;
    }
    const double r_hat = swr / sw;
    double q = 0.0;
    for (std::size_t j = 0; j < est.size(); ++j) q += w[j] * (est[j].r - r_hat) * (est[j].r - r_hat);
    const double next = std::max(0.0, (q - sws2 + sw2s2 / sw) / (sw - sw2 / sw));
    const double change = std::abs(next - delta_sq);
    delta_sq = next;
    f.iterations = it;
    for (std::size_t j = 0; j < est.size(); ++j) w[j] = 1.0 / (est[j].s * est[j].s + delta_sq);
    if (it > 1 && change < 1e-12 * std::min(1.0, delta_sq + min_s2)) break;
  }
  double sw = 0.0;
  f.delta_sq = delta_sq;
  f.r_hat = weighted_mean_at(est, delta_sq, &sw);
  f.se_r = 1.0 / std::sqrt(sw);
  fill_gaussian(f);
  return f;
}

double nl_loglik(const std::vector<StudyEstimate>& est, double r, double delta_sq) {
  constexpr double kTwoPi = 6.283185307179586476925;
  double ll = 0.0;
  for (const auto& e : est) {
    const double v = e.s * e.s + delta_sq;
    ll -= 0.5 * std::log(kTwoPi * v) + (e.r - r) * (e.r - r) / (2.0 * v);
  }
  return ll;
}

namespace {

// Upper search limit for Delta^2.
double delta_sq_ceiling(const std::vector<StudyEstimate>& est) {
  double spread = 0.0, s2 = 0.0;
  for (const auto& a : est) {
    s2 = std::max(s2, a.s * a.s);
    for (const auto& b : est) spread = std::max(spread, (a.r - b.r) * (a.r - b.r));
  }
  return 10.0 * (spread + s2);
}

// max over Delta^2 >= 0 of ln L(r, Delta^2), searched in tau = sqrt(Delta^2).
double profile_in_r(const std::vector<StudyEstimate>& est, double r, double tau_max) {
  const double tau = maximize_1d([&](double t) { return nl_loglik(est, r, t * t); }, 0.0, tau_max);
  return nl_loglik(est, r, tau * tau);
}

double profile_in_delta(const std::vector<StudyEstimate>& est, double delta_sq) {
  return nl_loglik(est, weighted_mean_at(est, delta_sq), delta_sq);
}

}  // namespace

RandomEffectsFit nl_fit(const std::vector<StudyEstimate>& est, Diagnostics* diag) {
  check_estimates(est);
  if (est.size() == 1) return passthrough(est, "NL", diag);
  RandomEffectsFit f;
  f.method = "NL";
  double delta_sq = mom_combine(est).delta_sq;
  double r_hat = weighted_mean_at(est, delta_sq);
  bool converged = false;
  double min_s2 = std::numeric_limits<double>::infinity();
  for (const auto& e : est) min_s2 = std::min(min_s2, e.s * e.s);
  for (int it = 1; it <= 10000; ++it) {
    r_hat = weighted_mean_at(est, delta_sq);
    double num = 0.0, den = 0.0;
    for (const auto& e : est) {
      const double v = e.s * e.s + delta_sq;
      num += ((e.r - r_hat) * (e.r - r_hat) - e.s * e.s) / (v * v);
      den += 1.0 / (v * v);
    }
    const double next = std::max(0.0, num / den);
    const double change = std::abs(next - delta_sq);
    delta_sq = next;
    f.iterations = it;
    if (change < 1e-14 * std::min(1.0, delta_sq + min_s2)) {
      converged = true;
      break;
    }
  }
  const double d_max = delta_sq_ceiling(est);
  if (!converged) {
    if (diag) diag->warnings.push_back("NL: fixed-point iteration did not converge; using direct maximization");
    const double tau = maximize_1d([&](double t) { return profile_in_delta(est, t * t); }, 0.0, std::sqrt(d_max));
    delta_sq = tau * tau;
    if (!std::isfinite(delta_sq)) throw NumericError("NL: maximum-likelihood fit failed");
  }
  double sw = 0.0;
  f.delta_sq = delta_sq;
  f.r_hat = weighted_mean_at(est, delta_sq, &sw);
  f.se_r = 1.0 / std::sqrt(sw);
  fill_gaussian(f);

  // Profile-likelihood intervals.
  const double ll_max = nl_loglik(est, f.r_hat, f.delta_sq);
  const double thr = chi2_1_quantile(0.95);
  const double tau_max = std::sqrt(d_max);
  auto dev_r = [&](double r) { return 2.0 * (ll_max - profile_in_r(est, r, tau_max)) - thr; };
  double span = 0.0;
  for (const auto& e : est) span = std::max(span, std::abs(e.r - f.r_hat) + 10.0 * e.s);
  IntervalEstimate rp;
  rp.level = 0.95;
  rp.point = f.r_hat;
  rp.method = "NL-profile";
  const double tol = 1e-10 * (std::abs(f.r_hat) + f.se_r);
  rp.lower = num::bisect(dev_r, f.r_hat - num::expand_bracket([&](double h) { return dev_r(f.r_hat - h); }, 0.0,
                                                               f.se_r, 2.0, span),
                         f.r_hat, tol);
  rp.upper = num::bisect(dev_r, f.r_hat,
                         f.r_hat + num::expand_bracket([&](double h) { return dev_r(f.r_hat + h); }, 0.0, f.se_r, 2.0,
                                                       span),
                         tol);
  f.r_profile95 = rp;

  auto dev_d = [&](double d) { return 2.0 * (ll_max - profile_in_delta(est, d)) - thr; };
  IntervalEstimate dp;
  dp.level = 0.95;
  dp.point = f.delta_sq;
  dp.method = "NL-profile";
  const double dtol = 1e-12 * (f.delta_sq + min_s2);
  dp.lower = dev_d(0.0) <= 0.0 ? 0.0 : num::bisect(dev_d, 0.0, f.delta_sq, dtol);
  const double d_hi = num::expand_bracket(dev_d, f.delta_sq, f.delta_sq + min_s2, 2.0, 1e6 * d_max);
  dp.upper = num::bisect(dev_d, f.delta_sq, d_hi, dtol);
  f.delta_sq_profile95 = dp;
  return f;
}

LikelihoodGrid nl_deviance_grid(const std::vector<StudyEstimate>& est, const RandomEffectsFit& fit, double r_lo,
                                double r_hi, double d_lo, double d_hi, std::size_t nr, std::size_t nd) {
  if (nr < 2 || nd < 2 || !(r_hi > r_lo) || !(d_hi > d_lo) || d_lo < 0.0)
    throw ValidationError("deviance grid needs >= 2 points per axis and 0 <= d_lo < d_hi");
  LikelihoodGrid g;
  g.r = num::linspace(r_lo, r_hi, nr);
  g.delta_sq = num::linspace(d_lo, d_hi, nd);
  const double ll_max = nl_loglik(est, fit.r_hat, fit.delta_sq);
  g.deviance.reserve(nr * nd);
  for (double r : g.r)
    for (double d : g.delta_sq) g.deviance.push_back(2.0 * (ll_max - nl_loglik(est, r, d)));
  return g;
}

// --- density combinations --------------------------------------------------------

std::vector<double> common_grid(const std::vector<GridDensity>& ds, std::size_t points) {
  if (ds.empty()) throw ValidationError("no densities to combine");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& d : ds) {
    if (d.grid.size() < 2) throw ValidationError("density grid needs at least two points");
    lo = std::min(lo, d.grid.front());
    hi = std::max(hi, d.grid.back());
  }
  return lo > 0.0 ? num::logspace(lo, hi, points) : num::linspace(lo, hi, points);
}

namespace {

std::vector<double> normalized_weights(std::vector<double> w, std::size_t k) {
  if (w.empty()) w.assign(k, 1.0);
  if (w.size() != k) throw ValidationError("one weight per density is required");
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("weights must be finite and >= 0");
    s += x;
  }
  if (!(s > 0.0)) throw ValidationError("weights must not all be zero");
  for (auto& x : w) x /= s;
  return w;
}

GridDensity on_grid(const GridDensity& d, const std::vector<double>& grid) {
  auto r = d.resampled(grid);
  r.normalize();
  return r;
}

}  // namespace

FusedDensity ot_barycenter(const std::vector<GridDensity>& ds, std::vector<double> weights, std::size_t n_quantiles,
                           std::optional<std::vector<double>> grid) {
  if (n_quantiles < 16) throw ValidationError("barycenter needs at least 16 quantile levels");
  const auto w = normalized_weights(std::move(weights), ds.size());
  const auto out_grid = grid ? *grid : common_grid(ds);
  // Midpoint levels: u = 0 and u = 1 would map to the grid ends, not to
  // properties of the densities.
  std::vector<double> q(n_quantiles, 0.0);
  for (std::size_t j = 0; j < ds.size(); ++j) {
    const auto cdf = ds[j].cdf();
    const auto support = std::count_if(ds[j].mass.begin(), ds[j].mass.end(), [](double m) { return m > 0.0; });
    if (support < 3 ||num::interp_linear(cdf, ds[j].grid, 0.99) - num::interp_linear(cdf, ds[j].grid, 0.01) <= 0.0)
      throw ValidationError("barycenter input is degenerate (point mass)");
    for (std::size_t i = 0; i < n_quantiles; ++i) {
      const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n_quantiles);
      q[i] += w[j] * num::interp_linear(cdf, ds[j].grid, u);
    }
  }
  // Strictly increasing knots for the inverse map.
  for (std::size_t i = 1; i < n_quantiles; ++i)
    if (q[i] <= q[i - 1]) q[i] = std::nextafter(q[i - 1], std::numeric_limits<double>::infinity());
  std::vector<double> u(n_quantiles);
  for (std::size_t i = 0; i < n_quantiles; ++i) u[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n_quantiles);

  const std::size_t m = out_grid.size();
  std::vector<double> cdf(m);
  for (std::size_t k = 0; k < m; ++k) cdf[k] = num::interp_linear(q, u, out_grid[k]);
  FusedDensity f;
  f.method = "OT";
  f.weights = w;
  f.density.grid = out_grid;
  f.density.mass.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1, b = k + 1 == m ? m - 1 : k + 1;
    f.density.mass[k] = std::max(0.0, (cdf[b] - cdf[a]) / (out_grid[b] - out_grid[a]));
  }
  f.density.normalize();
  return f;
}

FusedDensity mean_of_posteriors(const std::vector<GridDensity>& ds, std::vector<double> weights,
                                std::optional<std::vector<double>> grid) {
  const auto w = normalized_weights(std::move(weights), ds.size());
  const auto g = grid ? *grid : common_grid(ds);
  FusedDensity f;
  f.method = "SUM";
  f.weights = w;
  f.density.grid = g;
  f.density.mass.assign(g.size(), 0.0);
  for (std::size_t j = 0; j < ds.size(); ++j) {
    if (w[j] == 0.0) continue;
    const auto r = on_grid(ds[j], g);
    for (std::size_t k = 0; k < g.size(); ++k) f.density.mass[k] += w[j] * r.mass[k];
  }
  f.density.normalize();
  return f;
}

FusedDensity product_of_posteriors(const std::vector<GridDensity>& ds, const std::vector<double>& weights,
                                   std::optional<std::vector<double>> grid) {
  if (ds.empty()) throw ValidationError("no densities to combine");
  std::vector<double> w = weights.empty() ? std::vector<double>(ds.size(), 1.0) : weights;
  if (w.size() != ds.size()) throw ValidationError("one weight per density is required");
  for (double x : w)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("weights must be finite and >= 0");
  const auto g = grid ? *grid : common_grid(ds);
  std::vector<GridDensity> rs;
  for (const auto& d : ds) rs.push_back(on_grid(d, g));

  std::vector<double> logp(g.size(), 0.0);
  for (std::size_t j = 0; j < ds.size(); ++j)
    for (std::size_t k = 0; k < g.size(); ++k)
      logp[k] += w[j] == 0.0 ? 0.0 : w[j] * std::log(rs[j].mass[k]);
  const double peak = *std::max_element(logp.begin(), logp.end());
  std::vector<double> mass(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) mass[k] = std::isfinite(logp[k]) ? std::exp(logp[k] - peak) : 0.0;
  const double log_z = std::isfinite(peak) ? peak + std::log(num::trapezoid(g, mass)) : -INFINITY;

  if (!(log_z > std::log(DBL_MIN))) {
    // Most incompatible pair: smallest Bhattacharyya overlap.
    double worst = INFINITY;
    std::size_t a = 0, b = 0;
    std::vector<double> ov(g.size());
    for (std::size_t i = 0; i < rs.size(); ++i)
      for (std::size_t j = i + 1; j < rs.size(); ++j) {
        for (std::size_t k = 0; k < g.size(); ++k) ov[k] = std::sqrt(rs[i].mass[k] * rs[j].mass[k]);
        const double o = num::trapezoid(g, ov);
        if (o < worst) worst = o, a = i, b = j;
      }
    std::ostringstream msg;
    msg << "product of densities underflows (no common support); most incompatible pair: inputs " << a << " and " << b
        << " (overlap " << worst << ")";
    throw NumericError(msg.str());
  }
  FusedDensity f;
  f.method = "PROD";
  f.weights = w;
  f.density.grid = g;
  f.density.mass = std::move(mass);
  f.density.normalize();
  return f;
}

// --- joint likelihood ratio -------------------------------------------------------------

double joint_llr_curve(const std::vector<RatioCounts>& data, double r) {
  double s = 0.0;
  for (const auto& c : data) s += profile_llr(c, r);
  return s;
}

JointLlrResult joint_llr_combine(const std::vector<RatioCounts>& data, double level, Exec exec) {
  check_level(level);
  if (data.empty()) throw ValidationError("joint LLR needs at least one dataset");
  double lo = INFINITY, hi = 0.0;
  for (const auto& c : data) {
    if (c.k1 < 1 || c.k2 < 1 || c.k1 >= c.n1 || c.k2 >= c.n2)
      throw ValidationError("joint LLR: every dataset needs interior counts");
    lo = std::min(lo, c.r_hat());
    hi = std::max(hi, c.r_hat());
  }
  JointLlrResult out;

  // Minimize in log r.
  const double a = std::log(lo) - 0.1, b = std::log(hi) + 0.1;
  const double u_hat = maximize_1d([&](double u) { return -joint_llr_curve(data, std::exp(u)); }, a, b, 400);
  out.r_hat = std::exp(u_hat);
  const double d_min = joint_llr_curve(data, out.r_hat);
  const double thr = chi2_1_quantile(level);
  auto f = [&](double r) { return joint_llr_curve(data, r) - d_min - thr; };
  double lo_br = out.r_hat;
  for (int i = 0; i < 200 && f(lo_br) <= 0.0; ++i) lo_br *= 0.8;
  const double hi_br = num::expand_bracket(f, out.r_hat, 1.25 * out.r_hat, 1.25, 1e6 * out.r_hat);
  const double tol = 1e-9 * out.r_hat;
  out.ci.lower = num::bisect(f, lo_br, out.r_hat, tol);
  out.ci.upper = num::bisect(f, out.r_hat, hi_br, tol);
  out.ci.level = level;
  out.ci.point = out.r_hat;
  out.ci.method = "joint-llr";

  // Curve for plotting: per-dataset columns in parallel, summed in order.
  constexpr std::size_t kPoints = 512;
  const double span = std::log(out.ci.upper / out.ci.lower);
  out.r_grid = num::logspace(out.ci.lower * std::exp(-span), out.ci.upper * std::exp(span), kPoints);
  std::vector<double> cols(data.size() * kPoints);
  for_each_index(exec, static_cast<std::int64_t>(data.size()), [&](std::int64_t j) {
    for (std::size_t i = 0; i < kPoints; ++i)
      cols[static_cast<std::size_t>(j) * kPoints + i] = profile_llr(data[static_cast<std::size_t>(j)], out.r_grid[i]);
  });
  out.deviance.assign(kPoints, 0.0);
  for (std::size_t j = 0; j < data.size(); ++j)
    for (std::size_t i = 0; i < kPoints; ++i) out.deviance[i] += cols[j * kPoints + i];
  for (auto& v : out.deviance) v -= d_min;

  // Compatibility: pairwise disjoint single-dataset intervals.
  std::vector<IntervalEstimate> single;
  for (const auto& c : data) single.push_back(profile_llr_interval(c, level));
  for (std::size_t i = 0; i < single.size(); ++i)
    for (std::size_t j = i + 1; j < single.size(); ++j)
      if (single[i].upper < single[j].lower || single[j].upper < single[i].lower) out.disjoint_pairs.emplace_back(i, j);
  if (!out.disjoint_pairs.empty()) {
    std::string msg = std::to_string(out.disjoint_pairs.size()) + " dataset pair(s) with disjoint intervals:";
    for (const auto& [i, j] : out.disjoint_pairs) msg += " (" + std::to_string(i) + "," + std::to_string(j) + ")";
    out.warnings.push_back(msg + "; the joint estimate may be incompatible with them");
  }
  return out;
}

// --- summaries -----------------------------------------------------------------------

SummaryRow summarize(const FusedDensity& f) {
  SummaryRow r;
  r.method = f.method;
  r.interval_kind = "density";
  const auto c68 = credible_interval(f.density, kLevel68);
  const auto c95 = credible_interval(f.density, 0.95);
  r.mode = c95.mode;
  r.mean = c95.mean;
  r.q68_lo = c68.ci.lower;
  r.q68_hi = c68.ci.upper;
  r.q95_lo = c95.ci.lower;
  r.q95_hi = c95.ci.upper;
  return r;
}

SummaryRow summarize(const RandomEffectsFit& f) {
  SummaryRow r;
  r.method = f.method;
  r.interval_kind = "gaussian";
  r.mode = r.mean = f.r_hat;
  r.q68_lo = f.q68.lower;
  r.q68_hi = f.q68.upper;
  r.q95_lo = f.q95.lower;
  r.q95_hi = f.q95.upper;
  return r;
}

SummaryRow summarize(const JointLlrResult& r68, const JointLlrResult& r95) {
  SummaryRow r;
  r.method = "JointLLR";
  r.interval_kind = "likelihood";
  r.mode = r.mean = r95.r_hat;
  r.q68_lo = r68.ci.lower;
  r.q68_hi = r68.ci.upper;
  r.q95_lo = r95.ci.lower;
  r.q95_hi = r95.ci.upper;
  return r;
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows, double scale) {
  os << "method,mode,mean,q68_lo,q68_hi,q95_lo,q95_hi,interval\n";
  os.precision(8);
  for (const auto& r : rows)
    os << r.method << ',' << scale * r.mode << ',' << scale * r.mean << ',' << scale * r.q68_lo << ','
       << scale * r.q68_hi << ',' << scale * r.q95_lo << ',' << scale * r.q95_hi << ',' << r.interval_kind << '\n';
}

GridDensity read_density_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("density CSV is empty");
  if (line.rfind("r,density", 0) != 0) throw ValidationError("density CSV must start with the header r,density");
  GridDensity d;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError("density CSV row " + std::to_string(row) + " lacks a comma");
    try {
      const double x = std::stod(line.substr(0, comma)), y = std::stod(line.substr(comma + 1));
      if (!d.grid.empty() && !(x > d.grid.back()))
        throw ValidationError("density CSV grid must increase (row " + std::to_string(row) + ")");
      if (!(y >= 0.0)) throw ValidationError("density CSV has a negative density (row " + std::to_string(row) + ")");
      d.grid.push_back(x);
      d.mass.push_back(y);
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ValidationError*>(&e)) throw;
      throw ValidationError("density CSV row " + std::to_string(row) + " is not numeric");
    }
  }
  if (d.grid.size() < 2) throw ValidationError("density CSV needs at least two rows");
  d.normalize();
  return d;
}

}  // namespace ifr
