#include "ifr/bayes.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <ostream>

#include "ifr/numeric.hpp"
#include "ifr/ratio.hpp"

namespace ifr {

BetaParams parse_beta_prior(std::string_view name) {
  if (name == "jeffreys") return BetaParams::jeffreys();
  if (name == "flat" || name == "uniform") return BetaParams::flat();
  if (name == "haldane") return BetaParams::haldane();
  throw ValidationError("unknown beta prior: " + std::string(name));
}

BetaParams beta_posterior(const CountPair& c, const BetaParams& prior) {
  if (prior.alpha < 0.0 || prior.beta < 0.0) throw ValidationError("beta prior parameters must be >= 0");
  return {static_cast<double>(c.k) + prior.alpha, static_cast<double>(c.n - c.k) + prior.beta};
}

// --- GridDensity ------------------------------------------------------------

double GridDensity::integral() const { return num::trapezoid(grid, mass); }

void GridDensity::normalize() {
  const double z = integral();
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericError("density has no finite positive mass on its grid");
  for (auto& m : mass) m /= z;
  normalized = true;
}

std::vector<double> GridDensity::cdf() const {
  auto c = num::cumulative_trapezoid(grid, mass);
  const double z = c.back();
  if (!(z > 0.0)) throw NumericError("density has zero mass");
  for (auto& v : c) v /= z;
  return c;
}

double GridDensity::mean() const {
  std::vector<double> xm(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) xm[i] = grid[i] * mass[i];
  return num::trapezoid(grid, xm) / integral();
}

double GridDensity::mode() const {
  return grid[static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin())];
}

double GridDensity::quantile(double q) const {
  const auto c = cdf();
  return num::interp_linear(c, grid, q);
}

double GridDensity::value_at(double x) const {
  if (x < grid.front() || x > grid.back()) return 0.0;
  return num::interp_linear(grid, mass, x);
}

GridDensity GridDensity::resampled(const std::vector<double>& new_grid) const {
  GridDensity d;
  d.grid = new_grid;
  d.mass.resize(new_grid.size());
  for (std::size_t i = 0; i < new_grid.size(); ++i) d.mass[i] = value_at(new_grid[i]);
  if (normalized) d.normalize();
  return d;
}

bool GridDensity::tails_covered(double rel_tol) const {
  const double peak = *std::max_element(mass.begin(), mass.end());
  return mass.front() <= rel_tol * peak && mass.back() <= rel_tol * peak;
}

// --- ratio posterior ----------------------------------------------------------

namespace {

constexpr double kScaleFloor = 1e-6;
constexpr double kTailProb = 1e-13;
constexpr int kScaleNodes = 64;

// Weighted mixture of Beta densities; a single component when undressed.
struct BetaMixture {
  std::vector<double> a, b, log_norm;  // log_norm = log w - log B(a, b)
  double lo = 0.0, hi = 1.0;           // joint support at kTailProb tails

  double pdf(double x) const {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double lx = std::log(x), l1x = std::log1p(-x);
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += std::exp((a[j] - 1.0) * lx + (b[j] - 1.0) * l1x + log_norm[j]);
    return s;
  }
};

double scale_prior_pdf(const ScalePrior& p, double x) {
  if (p.family == ScaleFamily::normal) return num::normal_pdf((x - p.mu) / p.sigma) / p.sigma;
  const double shape = p.mu * p.mu / (p.sigma * p.sigma), rate = p.mu / (p.sigma * p.sigma);
  return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x - num::lgamma(shape));
}

double scale_prior_mass_below(const ScalePrior& p, double x) {
  if (p.family == ScaleFamily::normal) return num::normal_cdf((x - p.mu) / p.sigma);
  const double shape = p.mu * p.mu / (p.sigma * p.sigma), rate = p.mu / (p.sigma * p.sigma);
  return boost::math::gamma_p(shape, rate * x);
}

BetaMixture make_mixture(double k, double n, const BetaParams& prior, const ScalePrior& scale, const char* name,
                         Diagnostics* diag) {
  if (scale.sigma < 0.0 || !(scale.mu > 0.0)) throw ValidationError("scale prior needs mu > 0 and sigma >= 0");
  std::vector<double> nodes, weights;
  if (scale.sigma == 0.0) {
    nodes.push_back(scale.mu);
    weights.push_back(1.0);
  } else {
    const double lo = std::max(kScaleFloor, scale.mu - 6.0 * scale.sigma);
    const double hi = scale.mu + 6.0 * scale.sigma;
    const double cut = scale_prior_mass_below(scale, kScaleFloor);
    if (cut > 0.01 && diag)
      diag->warnings.push_back(std::string(name) + " prior: " + std::to_string(100.0 * cut) +
                               "% of the mass lies below the truncation point");
    const num::GaussLegendre gl(kScaleNodes);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (int j = 0; j < kScaleNodes; ++j) {
      const double x = mid + half * gl.nodes[j];
      nodes.push_back(x);
      weights.push_back(gl.weights[j] * half * scale_prior_pdf(scale, x));
    }
  }
  BetaMixture m;
  double wsum = 0.0;
  std::vector<double> w;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const double a = nodes[j] * k + prior.alpha, b = n - nodes[j] * k + prior.beta;
    if (!(a > 0.0 && b > 0.0)) {
      if (scale.sigma == 0.0) throw ValidationError("posterior Beta parameters must be positive");
      continue;  // scaled count exceeds its trials; outside the physical range
    }
    if (weights[j] <= 0.0) continue;
    m.a.push_back(a);
    m.b.push_back(b);
    w.push_back(weights[j]);
    wsum += weights[j];
  }
  if (m.a.empty()) throw NumericError("scale prior leaves no admissible Beta component");
  m.lo = 1.0;
  m.hi = 0.0;
  for (std::size_t j = 0; j < m.a.size(); ++j) {
    m.log_norm.push_back(std::log(w[j] / wsum) - num::log_beta_fn(m.a[j], m.b[j]));
    m.lo = std::min(m.lo, num::beta_quantile(m.a[j], m.b[j], kTailProb, 1e-16));
    m.hi = std::max(m.hi, num::beta_quantile(m.a[j], m.b[j], 1.0 - kTailProb, 1e-16));
  }
  return m;
}

double ratio_density_at(const BetaMixture& f1, const BetaMixture& f2, double r, const num::GaussLegendre& gl) {
  const double y_lo = std::max(f2.lo, f1.lo / r);
  const double y_hi = std::min({f2.hi, f1.hi / r, 1.0});
  if (!(y_hi > y_lo)) return 0.0;
  constexpr int kPanels = 4;
  const double w = (y_hi - y_lo) / kPanels;
  double s = 0.0;
  for (int p = 0; p < kPanels; ++p)
    s += gl.integrate([&](double y) { return y * f1.pdf(r * y) * f2.pdf(y); }, y_lo + p * w, y_lo + (p + 1) * w);
  return s;
}

std::pair<double, double> auto_bounds(const RatioCounts& c, double widen) {
  const auto k = katz_log_interval(c, 0.95, ZeroCellOptions{true});
  const double center = std::log(k.point > 0.0 ? k.point : std::sqrt(k.lower * k.upper));
  const double h = widen * 0.5 * std::log(k.upper / k.lower);
  return {std::exp(center - h), std::exp(center + h)};
}

GridDensity ratio_density(const RatioCounts& c, const BetaMixture& f1, const BetaMixture& f2, const GridSpec& spec,
                          Exec exec) {
  if (spec.points < 16) throw ValidationError("ratio grid needs at least 16 points");
  const double support_lo = f1.lo / f2.hi, support_hi = f1.hi / f2.lo;
  const bool explicit_bounds = spec.r_min.has_value() || spec.r_max.has_value();
  const num::GaussLegendre gl(32);

  double widen = 10.0;
  for (int attempt = 0; attempt < 6; ++attempt, widen *= 2.0) {
    auto [lo, hi] = auto_bounds(c, widen);
    lo = std::max(spec.r_min.value_or(lo), explicit_bounds ? 0.0 : support_lo);
    hi = std::min(spec.r_max.value_or(hi), explicit_bounds ? std::numeric_limits<double>::infinity() : support_hi);
    if (!(lo > 0.0 && hi > lo)) throw ValidationError("ratio grid bounds must satisfy 0 < r_min < r_max");

    GridDensity d;
    d.grid = num::logspace(lo, hi, spec.points);
    d.mass.resize(d.grid.size());
    for_each_index(exec, static_cast<std::int64_t>(d.grid.size()), [&](std::int64_t i) {
      const auto idx = static_cast<std::size_t>(i);
      d.mass[idx] = ratio_density_at(f1, f2, d.grid[idx], gl);
    });
    if (d.tails_covered()) {
      d.normalize();
      return d;
    }
    if (explicit_bounds) {
      const auto [slo, shi] = auto_bounds(c, 10.0);
      throw NumericError("ratio grid [" + std::to_string(lo) + ", " + std::to_string(hi) +
                         "] does not cover the posterior mass; try [" + std::to_string(std::max(slo, support_lo)) +
                         ", " + std::to_string(std::min(shi, support_hi)) + "]");
    }
  }
  throw NumericError("ratio grid could not be widened to cover the posterior mass");
}

}  // namespace

GridDensity ratio_posterior(const RatioCounts& c, const BetaParams& prior1, const BetaParams& prior2,
                            const GridSpec& spec, Exec exec) {
  return dressed_ratio_posterior(c, prior1, prior2, ScalePrior{}, ScalePrior{}, spec, nullptr, exec);
}

GridDensity dressed_ratio_posterior(const RatioCounts& c, const BetaParams& prior1, const BetaParams& prior2,
                                    const ScalePrior& gamma, const ScalePrior& lambda, const GridSpec& spec,
                                    Diagnostics* diag, Exec exec) {
  // γ and λ enter independent factors of the joint posterior, so the triple
  // integral factorizes: mix each Beta over its scale prior, then integrate y.
  const auto f1 = make_mixture(c.k1, c.n1, prior1, gamma, "gamma", diag);
  const auto f2 = make_mixture(c.k2, c.n2, prior2, lambda, "lambda", diag);
  return ratio_density(c, f1, f2, spec, exec);
}

CredibleInterval credible_interval(const GridDensity& d, double level) {
  check_level(level);
  const double a2 = 0.5 * (1.0 - level);
  CredibleInterval out;
  out.mean = d.mean();
  out.mode = d.mode();
  out.median = d.quantile(0.5);
  out.ci.lower = d.quantile(a2);
  out.ci.upper = d.quantile(1.0 - a2);
  out.ci.level = level;
  out.ci.point = out.mean;
  out.ci.method = "credible";
  return out;
}

void write_density_csv(std::ostream& os, const GridDensity& d) {
  os << "r,density\n";
  os.precision(12);
  for (std::size_t i = 0; i < d.grid.size(); ++i) os << d.grid[i] << ',' << d.mass[i] << '\n';
}

}  // namespace ifr
