#include "ifr/interval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ifr/numeric.hpp"
#include "ifr/rng.hpp"

namespace ifr {

namespace {

constexpr double kRootTol = 1e-13;

IntervalEstimate make(double lo, double hi, double level, double point, const char* method) {
  IntervalEstimate e;
  e.lower = lo;
  e.upper = hi;
  e.level = level;
  e.point = point;
  e.method = method;
  return e;
}

}  // namespace

IntervalEstimate wald_interval(const CountPair& c, double level) {
  check_level(level);
  const double z = z_for_level(level);
  const double p = c.p_hat();
  const double h = z * std::sqrt(p * (1.0 - p) / static_cast<double>(c.n));
  auto e = make(p - h, p + h, level, p, "wald");
  e.physical = e.lower >= 0.0 && e.upper <= 1.0;
  return e;
}

IntervalEstimate wilson_interval(const CountPair& c, double level) {
  check_level(level);
  const double z = z_for_level(level);
  const double z2 = z * z;
  const auto k = static_cast<double>(c.k), n = static_cast<double>(c.n);
  const double center = (k + 0.5 * z2) / (n + z2);
  const double half = z / (n + z2) * std::sqrt(k * (n - k) / n + 0.25 * z2);
  double lo = center - half, hi = center + half;
  if (c.k == 0) lo = 0.0;
  if (c.k == c.n) hi = 1.0;
  return make(std::max(0.0, lo), std::min(1.0, hi), level, center, "wilson");
}

IntervalEstimate clopper_pearson_interval(const CountPair& c, double level) {
  check_level(level);
  const double a2 = 0.5 * (1.0 - level);
  const auto k = static_cast<double>(c.k), n = static_cast<double>(c.n);
  double lo = 0.0, hi = 1.0;
  if (c.k == 0)
    hi = 1.0 - std::pow(a2, 1.0 / n);
  else if (c.k == c.n)
    lo = std::pow(a2, 1.0 / n);
  if (c.k > 0 && c.k < c.n) {
    lo = num::beta_quantile(k, n - k + 1.0, a2);
    hi = num::beta_quantile(k + 1.0, n - k, 1.0 - a2);
  }
  return make(lo, hi, level, c.p_hat(), "clopper-pearson");
}

IntervalEstimate midp_interval(const CountPair& c, double level) {
  check_level(level);
  const double a2 = 0.5 * (1.0 - level);
  const std::int64_t k = c.k, n = c.n;
  const double p_hat = c.p_hat();
  double lo = 0.0, hi = 1.0;
  if (k > 0) {
    // Upper-tail mid-p grows with p; the lower endpoint is where it reaches α/2.
    auto f = [&](double p) { return 0.5 * num::binom_pmf(k, n, p) + num::binom_sf(k + 1, n, p) - a2; };
    lo = num::bisect(f, 0.0, p_hat, kRootTol);
  }
  if (k < n) {
    auto f = [&](double p) { return 0.5 * num::binom_pmf(k, n, p) + num::binom_cdf(k - 1, n, p) - a2; };
    hi = num::bisect(f, p_hat, 1.0, kRootTol);
  }
  return make(lo, hi, level, p_hat, "midp");
}

double binomial_llr(std::int64_t k, std::int64_t n, double p0) {
  const auto kd = static_cast<double>(k), nd = static_cast<double>(n);
  const double m = nd - kd;
  const double a = kd == 0.0 ? 0.0 : kd * std::log(kd / (nd * p0));
  const double b = m == 0.0 ? 0.0 : m * std::log(m / (nd * (1.0 - p0)));
  return 2.0 * (a + b);
}

IntervalEstimate llr_interval_asymptotic(const CountPair& c, double level) {
  check_level(level);
  const double thr = chi2_1_quantile(level);
  const double p_hat = c.p_hat();
  const auto w = wilson_interval(c, level);
  auto f = [&](double p) { return binomial_llr(c.k, c.n, p) - thr; };

  double lo = 0.0, hi = 1.0;
  if (c.k > 0) {
    double start = std::max(0.0, p_hat - 3.0 * (p_hat - w.lower));
    if (f(start) <= 0.0) start = 0.0;  // LLR -> inf as p -> 0 when k > 0
    lo = start == 0.0 ? num::bisect(f, 0.0, p_hat, kRootTol) : num::bisect(f, start, p_hat, kRootTol);
  }
  if (c.k < c.n) {
    double stop = std::min(1.0, p_hat + 3.0 * (w.upper - p_hat));
    if (f(stop) <= 0.0) stop = 1.0;
    hi = num::bisect(f, p_hat, stop, kRootTol);
  }
  return make(lo, hi, level, p_hat, "llr");
}

BinomialMethod parse_binomial_method(std::string_view name) {
  if (name == "wald") return BinomialMethod::wald;
  if (name == "wilson") return BinomialMethod::wilson;
  if (name == "clopper-pearson" || name == "cp") return BinomialMethod::clopper_pearson;
  if (name == "midp" || name == "mid-p") return BinomialMethod::midp;
  if (name == "llr" || name == "llr-asymptotic") return BinomialMethod::llr;
  throw ValidationError("unknown binomial interval method: " + std::string(name));
}

std::string to_string(BinomialMethod m) {
  switch (m) {
    case BinomialMethod::wald: return "wald";
    case BinomialMethod::wilson: return "wilson";
    case BinomialMethod::clopper_pearson: return "clopper-pearson";
    case BinomialMethod::midp: return "midp";
    case BinomialMethod::llr: return "llr";
  }
  return "?";
}

IntervalEstimate binomial_interval(BinomialMethod m, const CountPair& c, double level) {
  switch (m) {
    case BinomialMethod::wald: return wald_interval(c, level);
    case BinomialMethod::wilson: return wilson_interval(c, level);
    case BinomialMethod::clopper_pearson: return clopper_pearson_interval(c, level);
    case BinomialMethod::midp: return midp_interval(c, level);
    case BinomialMethod::llr: return llr_interval_asymptotic(c, level);
  }
  throw ValidationError("unknown binomial interval method");
}

// --- Neyman belt ----------------------------------------------------------

BeltOrdering parse_belt_ordering(std::string_view name) {
  if (name == "llr-exact") return BeltOrdering::llr_exact;
  if (name == "llr-asymptotic") return BeltOrdering::llr_asymptotic;
  if (name == "central-pdf") return BeltOrdering::central_pdf;
  throw ValidationError("unknown belt ordering: " + std::string(name));
}

std::string to_string(BeltOrdering o) {
  switch (o) {
    case BeltOrdering::llr_exact: return "llr-exact";
    case BeltOrdering::llr_asymptotic: return "llr-asymptotic";
    case BeltOrdering::central_pdf: return "central-pdf";
  }
  return "?";
}

namespace {

struct SliceResult {
  std::vector<std::int64_t> accepted;
  double prob = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

// Histogram of `samples` Binom(n, θ) draws, sampled as one multinomial over
// the k cells through conditional binomials. Same law as drawing the samples
// one by one, at a cost independent of `samples`.
std::vector<std::int64_t> mc_histogram(const std::vector<double>& pmf, std::int64_t samples, Philox& rng) {
  std::vector<double> right(pmf.size());
  double s = 0.0;
  for (std::size_t k = pmf.size(); k-- > 0;) right[k] = (s += pmf[k]);
  std::vector<std::int64_t> hist(pmf.size(), 0);
  std::int64_t left = samples;
  for (std::size_t k = 0; k < pmf.size() && left > 0; ++k) {
    if (pmf[k] == 0.0) continue;
    const double q = k + 1 == pmf.size() ? 1.0 : std::min(1.0, pmf[k] / right[k]);
    const auto h = sample_binomial(rng, left, q);
    hist[k] = h;
    left -= h;
  }
  return hist;
}

SliceResult belt_slice(const BeltConfig& cfg, double theta, std::int64_t index) {
  const std::int64_t n = cfg.n;
  const auto pmf = num::binom_pmf_all(n, theta);
  SliceResult out;

  if (cfg.ordering == BeltOrdering::central_pdf) {
    const double a2 = 0.5 * (1.0 - cfg.level);
    // Tail sums from both ends; accept k iff P(X >= k) > α/2 and P(X <= k) > α/2.
    std::vector<double> left(pmf.size()), right(pmf.size());
    double s = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) left[k] = (s += pmf[k]);
    s = 0.0;
    for (std::size_t k = pmf.size(); k-- > 0;) right[k] = (s += pmf[k]);
    for (std::int64_t k = 0; k <= n; ++k) {
      const auto i = static_cast<std::size_t>(k);
      if (left[i] > a2 && right[i] > a2) {
        out.accepted.push_back(k);
        out.prob += pmf[i];
      }
    }
    return out;
  }

  std::vector<double> t(pmf.size());
  for (std::int64_t k = 0; k <= n; ++k) t[static_cast<std::size_t>(k)] = binomial_llr(k, n, theta);

  double t_cut = 0.0;
  if (cfg.ordering == BeltOrdering::llr_asymptotic) {
    t_cut = chi2_1_quantile(cfg.level);
  } else {
    Philox rng(cfg.seed, static_cast<std::uint64_t>(index));
    const auto hist = mc_histogram(pmf, cfg.mc_samples, rng);

    // Empirical cdf of t over the sample; t_C is the smallest t with F(t) >= level.
    std::vector<std::size_t> seen;
    for (std::size_t k = 0; k < hist.size(); ++k)
      if (hist[k] > 0) seen.push_back(k);
    std::sort(seen.begin(), seen.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
    const double need = cfg.level * static_cast<double>(cfg.mc_samples);
    std::int64_t acc = 0;
    t_cut = t[seen.back()];
    for (std::size_t j = 0; j < seen.size(); ++j) {
      acc += hist[seen[j]];
      // Equal t values belong to the same cdf step.
      if (j + 1 < seen.size() && t[seen[j + 1]] == t[seen[j]]) continue;
      if (static_cast<double>(acc) >= need) {
        t_cut = t[seen[j]];
        break;
      }
    }
  }
  out.threshold = t_cut;
  for (std::int64_t k = 0; k <= n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (t[i] <= t_cut) {
      out.accepted.push_back(k);
      out.prob += pmf[i];
    }
  }
  return out;
}

}  // namespace

ConfidenceBelt build_neyman_belt(const BeltConfig& cfg, Exec exec) {
  if (cfg.n < 1) throw ValidationError("belt: n must be >= 1");
  check_level(cfg.level);
  if (cfg.grid_size < 100) throw ValidationError("belt: grid_size must be >= 100");
  if (cfg.ordering == BeltOrdering::llr_exact && cfg.mc_samples < 10000)
    throw ValidationError("belt: mc_samples must be >= 10000 for llr-exact");
  if (!(cfg.param_min >= 0.0 && cfg.param_max <= 1.0 && cfg.param_min < cfg.param_max))
    throw ValidationError("belt: require 0 <= param_min < param_max <= 1");

  ConfidenceBelt belt;
  belt.n = cfg.n;
  belt.level = cfg.level;
  belt.ordering = cfg.ordering;
  belt.mc_samples = cfg.ordering == BeltOrdering::llr_exact ? cfg.mc_samples : 0;
  belt.seed = cfg.seed;
  belt.param_grid = num::linspace(cfg.param_min, cfg.param_max, static_cast<std::size_t>(cfg.grid_size));
  const auto g = belt.param_grid.size();
  belt.acceptance_sets.resize(g);
  belt.acceptance_prob.resize(g);
  belt.threshold.resize(g);

  for_each_index(exec, static_cast<std::int64_t>(g), [&](std::int64_t i) {
    const auto idx = static_cast<std::size_t>(i);
    auto r = belt_slice(cfg, belt.param_grid[idx], i);
    belt.acceptance_sets[idx] = std::move(r.accepted);
    belt.acceptance_prob[idx] = r.prob;
    belt.threshold[idx] = r.threshold;
  });
  return belt;
}

IntervalEstimate invert_belt(const ConfidenceBelt& belt, std::int64_t k) {
  if (k < 0 || k > belt.n) throw ValidationError("invert_belt: require 0 <= k <= n");
  std::ptrdiff_t first = -1, last = -1;
  bool contiguous = true;
  for (std::size_t i = 0; i < belt.param_grid.size(); ++i) {
    const auto& set = belt.acceptance_sets[i];
    if (!std::binary_search(set.begin(), set.end(), k)) continue;
    const auto ii = static_cast<std::ptrdiff_t>(i);
    if (last >= 0 && ii != last + 1) contiguous = false;
    if (first < 0) first = ii;
    last = ii;
  }
  if (first < 0) throw NumericError("invert_belt: no grid point accepts k; belt is inconsistent");
  auto e = make(belt.param_grid[static_cast<std::size_t>(first)], belt.param_grid[static_cast<std::size_t>(last)],
                belt.level, static_cast<double>(k) / static_cast<double>(belt.n), "");
  e.method = "belt-" + to_string(belt.ordering);
  e.contiguous = contiguous;
  return e;
}

}  // namespace ifr
