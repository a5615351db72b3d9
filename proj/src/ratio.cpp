#include "ifr/ratio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ifr/interval.hpp"
#include "ifr/numeric.hpp"
#include "ifr/rng.hpp"

namespace ifr {

namespace {

std::int64_t as_count(double x, const char* what) {
  const auto r = std::llround(x);
  if (std::abs(x - static_cast<double>(r)) > 1e-9)
    throw ValidationError(std::string(what) + " must be an integer count");
  return r;
}

IntervalEstimate ratio_estimate(double lo, double hi, double level, double point, const char* method) {
  IntervalEstimate e;
  e.lower = lo;
  e.upper = hi;
  e.level = level;
  e.point = point;
  e.method = method;
  return e;
}

struct LogScale {
  double log_r;
  double se;
};

LogScale katz_terms(const RatioCounts& c, ZeroCellOptions opt) {
  double k1 = c.k1, n1 = c.n1, k2 = c.k2, n2 = c.n2;
  if (opt.continuity_correction) {
    if (k1 == 0.0) k1 = 0.5, n1 += 1.0;
    if (k2 == 0.0) k2 = 0.5, n2 += 1.0;
  }
  if (k1 <= 0.0 || k2 <= 0.0)
    throw ValidationError("log-ratio interval needs k1 >= 1 and k2 >= 1 (or the continuity correction)");
  const double se = std::sqrt(1.0 / k1 - 1.0 / n1 + 1.0 / k2 - 1.0 / n2);
  return {std::log((k1 / n1) / (k2 / n2)), se};
}

}  // namespace

IntervalEstimate conditional_ratio_interval(const RatioCounts& c, double level, ConditionalBase base) {
  check_level(level);
  const auto k1 = as_count(c.k1, "k1");
  const auto k2 = as_count(c.k2, "k2");
  if (k1 + k2 < 1) throw ValidationError("conditional ratio interval needs k1 + k2 >= 1");
  const CountPair cond(k1, k1 + k2);
  const auto p = base == ConditionalBase::cp ? clopper_pearson_interval(cond, level) : midp_interval(cond, level);
  const double scale = c.n2 / c.n1;
  auto to_r = [&](double q) { return scale * q / (1.0 - q); };
  const double point = k2 > 0 ? c.r_hat() : std::numeric_limits<double>::infinity();
  auto e = ratio_estimate(to_r(p.lower), 0.0, level, point,
                          base == ConditionalBase::cp ? "conditional-cp" : "conditional-midp");
  if (p.upper >= 1.0) {
    e.upper = std::numeric_limits<double>::infinity();
    e.upper_unbounded = true;
  } else {
    e.upper = to_r(p.upper);
  }
  return e;
}

IntervalEstimate katz_log_interval(const RatioCounts& c, double level, ZeroCellOptions opt) {
  check_level(level);
  const auto t = katz_terms(c, opt);
  const double h = z_for_level(level) * t.se;
  return ratio_estimate(std::exp(t.log_r - h), std::exp(t.log_r + h), level, std::exp(t.log_r), "katz");
}

IntervalEstimate asinh_ratio_interval(const RatioCounts& c, double level, ZeroCellOptions opt) {
  check_level(level);
  const auto t = katz_terms(c, opt);
  const double h = 2.0 * std::asinh(0.5 * z_for_level(level) * t.se);
  return ratio_estimate(std::exp(t.log_r - h), std::exp(t.log_r + h), level, std::exp(t.log_r), "asinh");
}

BootstrapVariant parse_bootstrap_variant(std::string_view name) {
  if (name == "prc") return BootstrapVariant::prc;
  if (name == "bc") return BootstrapVariant::bc;
  if (name == "bca") return BootstrapVariant::bca;
  throw ValidationError("unknown bootstrap variant: " + std::string(name));
}

std::string to_string(BootstrapVariant v) {
  switch (v) {
    case BootstrapVariant::prc: return "prc";
    case BootstrapVariant::bc: return "bc";
    case BootstrapVariant::bca: return "bca";
  }
  return "?";
}

double bootstrap_acceleration(const RatioCounts& c) {
  const double k1 = c.k1, n1 = c.n1, k2 = c.k2, n2 = c.n2;
  if (n1 < 2 || n2 < 2 || k2 < 1) throw ValidationError("jackknife needs n1, n2 >= 2 and k2 >= 1");
  // Leave-one-out values take four distinct forms; weight each by its multiplicity.
  struct Term {
    double theta, weight;
  };
  std::vector<Term> terms;
  const double p2 = k2 / n2, p1 = k1 / n1;
  if (k1 > 0) terms.push_back({((k1 - 1) / (n1 - 1)) / p2, k1});
  if (n1 - k1 > 0) terms.push_back({(k1 / (n1 - 1)) / p2, n1 - k1});
  if (k2 > 1) terms.push_back({p1 / ((k2 - 1) / (n2 - 1)), k2});
  if (n2 - k2 > 0) terms.push_back({p1 / (k2 / (n2 - 1)), n2 - k2});
  // With k2 = 1 the leave-one-out ratio is undefined for the single positive; it is skipped.
  double w = 0.0, mean = 0.0;
  for (const auto& t : terms) {
    w += t.weight;
    mean += t.weight * t.theta;
  }
  mean /= w;
  double s2 = 0.0, s3 = 0.0;
  for (const auto& t : terms) {
    const double d = mean - t.theta;
    s2 += t.weight * d * d;
    s3 += t.weight * d * d * d;
  }
  if (s2 <= 0.0) return 0.0;
  return s3 / (6.0 * std::pow(s2, 1.5));
}

BootstrapInterval bootstrap_ratio_interval(const RatioCounts& c, double level, const BootstrapConfig& cfg,
                                           Exec exec) {
  check_level(level);
  if (cfg.replicates < 1000) throw ValidationError("bootstrap: replicates must be >= 1000");
  as_count(c.k1, "k1");
  const auto n1 = as_count(c.n1, "n1");
  const auto k2 = as_count(c.k2, "k2"), n2 = as_count(c.n2, "n2");
  if (k2 < 1) throw ValidationError("bootstrap: k2 must be >= 1");
  const double p1 = c.p1(), p2 = c.p2(), r_hat = c.r_hat();

  const auto B = cfg.replicates;
  std::vector<double> rs(static_cast<std::size_t>(B));
  for_each_index(exec, B, [&](std::int64_t b) {
    Philox rng(cfg.seed, static_cast<std::uint64_t>(b));
    const auto s1 = sample_binomial(rng, n1, p1);
    const auto s2 = sample_binomial(rng, n2, p2);
    rs[static_cast<std::size_t>(b)] = s2 == 0 ? std::numeric_limits<double>::quiet_NaN()
                                              : (static_cast<double>(s1) / static_cast<double>(n1)) /
                                                    (static_cast<double>(s2) / static_cast<double>(n2));
  });
  const auto valid_end = std::remove_if(rs.begin(), rs.end(), [](double x) { return std::isnan(x); });
  BootstrapInterval out;
  out.discarded = static_cast<std::int64_t>(rs.end() - valid_end);
  rs.erase(valid_end, rs.end());
  if (rs.empty()) throw NumericError("bootstrap: every resample had k2* = 0");
  std::sort(rs.begin(), rs.end());

  const double a2 = 0.5 * (1.0 - level);
  double q_lo = a2, q_hi = 1.0 - a2;
  if (cfg.variant != BootstrapVariant::prc) {
    const auto below = std::lower_bound(rs.begin(), rs.end(), r_hat) - rs.begin();
    out.z0 = cfg.z0_override.value_or(
        num::normal_quantile(static_cast<double>(below) / static_cast<double>(rs.size())));
    out.accel = cfg.variant == BootstrapVariant::bca ? cfg.accel_override.value_or(bootstrap_acceleration(c)) : 0.0;
    auto adjust = [&](double q) {
      const double zq = num::normal_quantile(q);
      const double s = out.z0 + zq;
      return num::normal_cdf(out.z0 + s / (1.0 - out.accel * s));
    };
    if (out.z0 != 0.0 || out.accel != 0.0) {
      q_lo = adjust(a2);
      q_hi = adjust(1.0 - a2);
    }
  }
  const char* tag = cfg.variant == BootstrapVariant::prc ? "bootstrap-prc"
                    : cfg.variant == BootstrapVariant::bc ? "bootstrap-bc"
                                                          : "bootstrap-bca";
  out.ci = ratio_estimate(num::nearest_rank_quantile(rs, q_lo), num::nearest_rank_quantile(rs, q_hi), level,
                          r_hat, tag);
  return out;
}

double profile_nuisance_root(const RatioCounts& c, double r0) {
  if (!(r0 > 0.0)) throw ValidationError("profile: r0 must be positive");
  const double a = c.n1 + c.n2;
  const double b = c.k1 + c.n2 + c.k2 * r0 + c.n1 * r0;
  const double cc = (c.k1 + c.k2) * r0;
  const double disc = std::max(0.0, b * b - 4.0 * a * cc);
  // Smaller root; written to avoid cancellation when 4ac << b².
  return 2.0 * cc / (b + std::sqrt(disc));
}

namespace {

double log_lik(const RatioCounts& c, double p1, double p2) {
  return num::xlogy(c.k1, p1) + num::xlogy(c.n1 - c.k1, 1.0 - p1) + num::xlogy(c.k2, p2) +
         num::xlogy(c.n2 - c.k2, 1.0 - p2);
}

}  // namespace

double profile_llr(const RatioCounts& c, double r0) {
  const double p1 = profile_nuisance_root(c, r0);
  return 2.0 * (log_lik(c, c.p1(), c.p2()) - log_lik(c, p1, p1 / r0));
}

IntervalEstimate profile_llr_interval(const RatioCounts& c, double level) {
  check_level(level);
  if (c.k1 < 1 || c.k2 < 1 || c.k1 >= c.n1 || c.k2 >= c.n2)
    throw ValidationError("profile likelihood needs interior counts; use the Monte Carlo belt at the boundary");
  const double thr = chi2_1_quantile(level);
  const double r_hat = c.r_hat();
  auto f = [&](double r) { return profile_llr(c, r) - thr; };
  const double tol = 1e-8 * r_hat;

  double lo_br = r_hat;
  for (int i = 0; i < 200 && f(lo_br) <= 0.0; ++i) lo_br *= 0.5;
  if (f(lo_br) <= 0.0) throw NumericError("profile: lower endpoint not bracketed");
  const double hi_br = num::expand_bracket(f, r_hat, 2.0 * r_hat, 2.0, 1e12);
  const double lo = num::bisect(f, lo_br, r_hat, tol);
  const double hi = num::bisect(f, r_hat, hi_br, tol);
  return ratio_estimate(lo, hi, level, r_hat, "profile-llr");
}

CountPair single_binomial_reduction(const RatioCounts& c) {
  const auto k1 = as_count(c.k1, "k1");
  const auto n = std::llround(c.n1 * c.p2());
  return CountPair(k1, std::max<std::int64_t>(n, k1));
}

}  // namespace ifr
