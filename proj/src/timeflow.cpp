#include "ifr/timeflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "ifr/nnls.hpp"
#include "ifr/numeric.hpp"
#include "ifr/rng.hpp"

namespace ifr {

using std::chrono::day;
using std::chrono::month;
using std::chrono::year;
using std::chrono::year_month_day;

Date parse_date(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  const std::string str(s);
  if (str.size() != 10 || std::sscanf(str.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
    throw ValidationError("malformed date '" + str + "' (expected YYYY-MM-DD)");
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw ValidationError("invalid calendar date '" + str + "'");
  return Date{ymd};
}

std::string format_date(Date d) {
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::vector<double> EpiSeries::cumulative() const {
  std::vector<double> c(daily.size());
  std::partial_sum(daily.begin(), daily.end(), c.begin());
  return c;
}

void validate_series(const EpiSeries& s) {
  for (std::size_t i = 0; i < s.daily.size(); ++i)
    if (!(s.daily[i] >= 0.0) || !std::isfinite(s.daily[i]))
      throw ValidationError("series entry on " + format_date(s.date_at(i)) + " is negative or not finite");
}

// --- kernels ------------------------------------------------------------------

double DelayKernel::mean() const {
  double m = 0.0;
  for (std::size_t t = 0; t < pdf.size(); ++t) m += static_cast<double>(t) * pdf[t];
  return m;
}

double DelayKernel::sd() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t t = 0; t < pdf.size(); ++t) v += (static_cast<double>(t) - m) * (static_cast<double>(t) - m) * pdf[t];
  return std::sqrt(v);
}

namespace {

void normalize_pdf(std::vector<double>& pdf) {
  const double z = std::accumulate(pdf.begin(), pdf.end(), 0.0);
  if (!(z > 0.0)) throw NumericError("kernel has no mass on its grid");
  for (auto& v : pdf) v /= z;
}

// Drop trailing bins whose combined mass is negligible.
void trim_tail(std::vector<double>& pdf, double eps = 1e-12) {
  double tail = 0.0;
  std::size_t keep = pdf.size();
  while (keep > 1 && tail + pdf[keep - 1] < eps) tail += pdf[--keep];
  pdf.resize(keep);
}

}  // namespace

DelayKernel weibull_kernel(double scale, double shape, int t_max, std::string label, Diagnostics* diag) {
  if (!(scale > 0.0 && shape > 0.0)) throw ValidationError("Weibull kernel needs scale > 0 and shape > 0");
  if (t_max < 1) throw ValidationError("kernel t_max must be >= 1");
  // Survival differences keep the far tail accurate.
  auto surv = [&](double x) { return std::exp(-std::pow(x / scale, shape)); };
  DelayKernel k;
  k.label = std::move(label);
  k.scale = scale;
  k.shape = shape;
  k.pdf.resize(static_cast<std::size_t>(t_max) + 1);
  k.pdf[0] = -std::expm1(-std::pow(0.5 / scale, shape));
  for (int t = 1; t <= t_max; ++t) k.pdf[static_cast<std::size_t>(t)] = surv(t - 0.5) - surv(t + 0.5);
  k.truncated_mass = surv(t_max + 0.5);
  if (k.truncated_mass > 1e-3 && diag)
    diag->warnings.push_back("kernel " + k.label + ": t_max = " + std::to_string(t_max) + " truncates " +
                             std::to_string(100.0 * k.truncated_mass) + "% of the mass");
  normalize_pdf(k.pdf);
  return k;
}

DelayKernel delta_kernel(int at, std::string label) {
  if (at < 0) throw ValidationError("delta kernel position must be >= 0");
  DelayKernel k;
  k.label = std::move(label);
  k.pdf.assign(static_cast<std::size_t>(at) + 1, 0.0);
  k.pdf.back() = 1.0;
  return k;
}

DelayKernel exponential_kernel(double half_life, int t_max, std::string label) {
  if (!(half_life > 0.0)) throw ValidationError("half-life must be positive");
  return weibull_kernel(half_life / std::log(2.0), 1.0, t_max, std::move(label));
}

std::pair<double, double> weibull_from_moments(double mean, double sd) {
  if (!(mean > 0.0 && sd > 0.0)) throw ValidationError("Weibull moments need mean > 0 and sd > 0");
  const double cv = sd / mean;
  auto cv_of = [](double k) {
    const double g1 = num::lgamma(1.0 + 1.0 / k), g2 = num::lgamma(1.0 + 2.0 / k);
    return std::sqrt(std::max(0.0, std::exp(g2 - 2.0 * g1) - 1.0));
  };
  // cv decreases in the shape; bisect on log(shape).
  const double lk = num::bisect([&](double u) { return cv_of(std::exp(u)) - cv; }, std::log(0.1), std::log(200.0), 1e-12);
  const double k = std::exp(lk);
  return {mean / std::exp(num::lgamma(1.0 + 1.0 / k)), k};
}

DelayKernel convolve_kernels(const DelayKernel& a, const DelayKernel& b) {
  if (a.pdf.empty() || b.pdf.empty()) throw ValidationError("cannot convolve an empty kernel");
  DelayKernel k;
  k.label = a.label + "*" + b.label;
  k.pdf.assign(a.pdf.size() + b.pdf.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.pdf.size(); ++i)
    for (std::size_t j = 0; j < b.pdf.size(); ++j) k.pdf[i + j] += a.pdf[i] * b.pdf[j];
  normalize_pdf(k.pdf);
  k.truncated_mass = a.truncated_mass + b.truncated_mass;
  if (k.sd() > 0.0) std::tie(k.scale, k.shape) = weibull_from_moments(k.mean(), k.sd());
  return k;
}

EpiSeries convolve_series(const DelayKernel& k, const EpiSeries& s) {
  EpiSeries out;
  out.start = s.start;
  out.kind = s.kind;
  if (s.daily.empty()) return out;
  out.daily.assign(s.daily.size() + k.pdf.size() - 1, 0.0);
  for (std::size_t i = 0; i < s.daily.size(); ++i) {
    if (s.daily[i] == 0.0) continue;
    for (std::size_t j = 0; j < k.pdf.size(); ++j) out.daily[i + j] += s.daily[i] * k.pdf[j];
  }
  return out;
}

// --- deconvolution --------------------------------------------------------------

namespace {

Eigen::MatrixXd difference_matrix(Eigen::Index n, int order) {
  if (order == 0) return Eigen::MatrixXd::Identity(n, n);
  static const std::vector<std::vector<double>> stencils{{-1.0, 1.0}, {1.0, -2.0, 1.0}};
  if (order != 1 && order != 2) throw ValidationError("derivative_order must be 0, 1 or 2");
  const auto& st = stencils[static_cast<std::size_t>(order - 1)];
  const Eigen::Index rows = std::max<Eigen::Index>(0, n - order);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(rows, n);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < st.size(); ++c) L(r, r + static_cast<Eigen::Index>(c)) = st[c];
  return L;
}

DeconvResult solve_deconvolution(const EpiSeries& y, const DelayKernel& k, const DeconvConfig& cfg, double lambda) {
  if (!(lambda >= 0.0)) throw ValidationError("lambda_r must be >= 0");
  if (y.daily.empty()) throw ValidationError("cannot deconvolve an empty series");
  const int support = k.support();
  const int pad = cfg.pad_days < 0 ? support : cfg.pad_days;
  if (pad < support)
    throw ValidationError("pad_days (" + std::to_string(pad) + ") must cover the kernel support (" +
                          std::to_string(support) + ")");
  const auto n = static_cast<Eigen::Index>(y.daily.size()) + pad;

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - support); j <= i; ++j)
      A(i, j) = k.pdf[static_cast<std::size_t>(i - j)];
  const Eigen::MatrixXd L = difference_matrix(n, cfg.derivative_order);

  Eigen::MatrixXd At(n + L.rows(), n);
  At.topRows(n) = A;
  At.bottomRows(L.rows()) = lambda * L;
  Eigen::VectorXd yt = Eigen::VectorXd::Zero(n + L.rows());
  for (std::size_t i = 0; i < y.daily.size(); ++i) yt(pad + static_cast<Eigen::Index>(i)) = y.daily[i];

  const auto sol = nnls(At, yt, cfg.max_iter);
  if (!sol.converged) {
    const Eigen::VectorXd r = A * sol.x - yt.head(n);
    throw NumericError("deconvolution did not converge after " + std::to_string(sol.iterations) +
                       " iterations (residual norm " + std::to_string(r.norm()) + ", relative " +
                       std::to_string(r.norm() / std::max(1e-300, yt.head(n).norm())) + ")");
  }

  DeconvResult out;
  out.lambda_r = lambda;
  out.pad_days = pad;
  out.iterations = sol.iterations;
  out.residual_norm = (A * sol.x - yt.head(n)).norm();
  out.penalty_norm = (L * sol.x).norm();
  out.x.start = y.start - std::chrono::days(pad);
  out.x.kind = SeriesKind::infections;
  out.x.daily.assign(sol.x.data(), sol.x.data() + n);
  return out;
}

}  // namespace

bool has_oscillation(const std::vector<double>& x, double rel) {
  if (x.size() < 4) return false;
  const double thr = rel * *std::max_element(x.begin(), x.end());
  double prev = 0.0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const double d2 = x[i - 1] - 2.0 * x[i] + x[i + 1];
    if (i > 1 && std::abs(d2) > thr && std::abs(prev) > thr && (d2 > 0.0) != (prev > 0.0)) return true;
    prev = d2;
  }
  return false;
}

double select_lambda(const EpiSeries& y, const DelayKernel& k, const DeconvConfig& cfg) {
  if (cfg.lambda_grid.empty()) throw ValidationError("lambda_grid is empty");
  auto grid = cfg.lambda_grid;
  std::sort(grid.begin(), grid.end());
  for (double lam : grid) {
    try {
      if (!has_oscillation(solve_deconvolution(y, k, cfg, lam).x.daily)) return lam;
    } catch (const NumericError&) {
      // an unregularized solve may hit the iteration cap; try the next value
    }
  }
  return grid.back();
}

DeconvResult deconvolve(const EpiSeries& y, const DelayKernel& k, const DeconvConfig& cfg) {
  validate_series(y);
  const double lambda = cfg.lambda_r ? *cfg.lambda_r : select_lambda(y, k, cfg);
  return solve_deconvolution(y, k, cfg, lambda);
}

// --- psi ---------------------------------------------------------------------

double cumulative_at(const std::vector<double>& cum, double u) {
  if (cum.empty() || u < 0.0) return 0.0;
  const double last = static_cast<double>(cum.size() - 1);
  if (u >= last) return cum.back();
  const auto i = static_cast<std::size_t>(std::floor(u));
  const double f = u - static_cast<double>(i);
  return cum[i] + f * (cum[i + 1] - cum[i]);
}

namespace {

struct PsiCurves {
  std::vector<double> num;  // cumulative K_F * x
  std::vector<double> den;  // cumulative K_S * x
  double total = 0.0;

  PsiCurves(const EpiSeries& x, const DelayKernel& k_f, const DelayKernel& k_s)
      : num(convolve_series(k_f, x).cumulative()), den(convolve_series(k_s, x).cumulative()) {
    total = std::accumulate(x.daily.begin(), x.daily.end(), 0.0);
  }

  double operator()(double t, double dt) const {
    if (dt < 0.0) throw ValidationError("psi: dt must be >= 0");
    const double d = cumulative_at(den, t);
    if (!(d > 1e-14 * total) || !(total > 0.0))
      throw NumericError("psi: seroconversion curve vanishes at t = " + std::to_string(t) + " (pre-epidemic)");
    return cumulative_at(num, t + dt) / d;
  }
};

}  // namespace

double psi(double t, double dt, const EpiSeries& x_hat, const DelayKernel& k_f, const DelayKernel& k_s) {
  return PsiCurves(x_hat, k_f, k_s)(t, dt);
}

std::vector<double> PsiSurface::row(std::size_t it) const {
  const auto b = value.begin() + static_cast<std::ptrdiff_t>(it * dt.size());
  return {b, b + static_cast<std::ptrdiff_t>(dt.size())};
}

namespace {

std::vector<double> dt_grid(double dt_max, double dt_step) {
  if (!(dt_step > 0.0 && dt_max >= 0.0)) throw ValidationError("dt grid needs dt_step > 0 and dt_max >= 0");
  const auto n = static_cast<std::size_t>(std::floor(dt_max / dt_step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<double>(i) * dt_step;
  return g;
}

}  // namespace

PsiSurface psi_surface(const EpiSeries& x_hat, const DelayKernel& k_f, const DelayKernel& k_s,
                       const std::vector<double>& t, double dt_max, double dt_step) {
  const PsiCurves curves(x_hat, k_f, k_s);
  PsiSurface s;
  s.t = t;
  s.dt = dt_grid(dt_max, dt_step);
  s.value.reserve(t.size() * s.dt.size());
  for (double ti : t)
    for (double d : s.dt) s.value.push_back(curves(ti, d));
  s.lo95 = s.value;
  s.hi95 = s.value;
  return s;
}

double solve_delay_row(const std::vector<double>& dt, const std::vector<double>& psi_row) {
  if (dt.empty() || dt.size() != psi_row.size()) throw ValidationError("delay row and grid sizes differ");
  constexpr double kTol = 1e-12;
  if (psi_row[0] > 1.0 + kTol)
    throw NumericError("psi exceeds 1 already at dt = 0; deaths lead seroconversion at this t");
  if (std::abs(psi_row[0] - 1.0) <= kTol) return dt[0];
  for (std::size_t i = 1; i < dt.size(); ++i) {
    if (psi_row[i] >= 1.0) {
      const double f = (1.0 - psi_row[i - 1]) / (psi_row[i] - psi_row[i - 1]);
      return dt[i - 1] + f * (dt[i] - dt[i - 1]);
    }
  }
  throw NumericError("psi stays below 1 up to dt = " + std::to_string(dt.back()) +
                     "; the crossing lies in the asymptotic future, use a fixed read-out delay instead");
}

DelayEstimate solve_optimal_delay(const PsiSurface& surface, std::size_t it) {
  if (it >= surface.t.size()) throw ValidationError("psi surface row out of range");
  const double d = solve_delay_row(surface.dt, surface.row(it));
  return {d, d, d};
}

double seroprevalence_count(double n_p, double positives, double n_t) {
  if (!(n_p > 0.0 && n_t > 0.0 && positives >= 0.0)) throw ValidationError("seroprevalence needs n_P, n_T > 0");
  return n_p * positives / n_t;
}

double corrected_ifr(double deaths_cum, double seroprev_count, double psi_val) {
  if (!(psi_val > 0.0)) throw ValidationError("psi must be positive");
  if (!(seroprev_count > 0.0)) throw ValidationError("seroprevalence count must be positive");
  return deaths_cum / (psi_val * seroprev_count);
}

double corrected_ifr(double t, double dt, const EpiSeries& deaths, double seroprev_count, double psi_val) {
  return corrected_ifr(cumulative_at(deaths.cumulative(), t + dt), seroprev_count, psi_val);
}

// --- seroreversion -------------------------------------------------------------

SeroreversionResult seroreversion_adjust(const EpiSeries& x_hat, const DelayKernel& k_s, const DelayKernel& k_r) {
  validate_series(x_hat);
  EpiSeries is;
  is.start = x_hat.start;
  is.kind = SeriesKind::seroprevalence;
  is.daily = convolve_series(k_s, x_hat).cumulative();
  // Extend the cumulative curve flat so the reversion tail unwinds in full.
  const double last = is.daily.empty() ? 0.0 : is.daily.back();
  is.daily.resize(is.daily.size() + k_r.pdf.size() - 1, last);
  const auto reverted = convolve_series(k_r, is);

  SeroreversionResult out;
  out.measurable.start = x_hat.start;
  out.measurable.kind = SeriesKind::seroprevalence;
  out.measurable.daily.resize(is.daily.size());
  for (std::size_t i = 0; i < is.daily.size(); ++i) {
    double v = is.daily[i] - reverted.daily[i];
    if (v < 0.0) {
      v = 0.0;
      ++out.clipped;
    }
    out.measurable.daily[i] = v;
  }
  return out;
}

// --- kernel configuration ------------------------------------------------------

CombinedKernels combine_kernels(const KernelSet& ks, Diagnostics* diag) {
  auto make = [&](const KernelParams& p) { return weibull_kernel(p.scale, p.shape, ks.t_max, p.label, diag); };
  const auto io = make(ks.io), oc = make(ks.oc), os = make(ks.os), cf = make(ks.cf);
  CombinedKernels c{convolve_kernels(io, oc), convolve_kernels(io, os), {}};
  c.k_f = convolve_kernels(c.k_c, cf);
  for (auto* k : {&c.k_c, &c.k_s, &c.k_f}) trim_tail(k->pdf);
  c.k_c.label = "K_C";
  c.k_s.label = "K_S";
  c.k_f.label = "K_F";
  return c;
}

KernelSet load_kernel_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open kernel config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("kernel config " + path + ": " + e.what());
  }
  KernelSet ks;
  ks.t_max = j.value("t_max", 60);
  ks.approximate = j.value("approximate", true);
  bool seen[4] = {false, false, false, false};
  if (!j.contains("kernels") || !j["kernels"].is_array()) throw ValidationError("kernel config needs a kernels array");
  for (const auto& e : j["kernels"]) {
    KernelParams p;
    try {
      p.label = e.at("label").get<std::string>();
      p.scale = e.at("scale").get<double>();
      p.shape = e.at("shape").get<double>();
      p.scale_unc_rel = e.value("scale_unc_rel", 0.2);
      p.shape_unc_rel = e.value("shape_unc_rel", 0.2);
    } catch (const nlohmann::json::exception& ex) {
      throw ValidationError("kernel config entry: " + std::string(ex.what()));
    }
    if (!(p.scale > 0.0 && p.shape > 0.0)) throw ValidationError("kernel " + p.label + ": scale and shape must be > 0");
    const char* labels[4] = {"I->O", "O->C", "O->S", "C->F"};
    KernelParams* slots[4] = {&ks.io, &ks.oc, &ks.os, &ks.cf};
    bool matched = false;
    for (int i = 0; i < 4; ++i) {
      if (p.label == labels[i]) {
        *slots[i] = p;
        seen[i] = matched = true;
      }
    }
    if (!matched) throw ValidationError("kernel config: unknown label " + p.label);
  }
  for (bool s : seen)
    if (!s) throw ValidationError("kernel config must define I->O, O->C, O->S and C->F");
  return ks;
}

// --- uncertainty propagation -------------------------------------------------------

namespace {

double window_deaths(const std::vector<double>& deaths_cum, double offset, int t0, int t1, double dt) {
  double s = 0.0;
  for (int t = t0; t <= t1; ++t) s += cumulative_at(deaths_cum, t + offset + dt);
  return s / static_cast<double>(t1 - t0 + 1);
}

KernelParams perturb(const KernelParams& p, Philox& rng) {
  KernelParams q = p;
  q.scale = p.scale * (1.0 + p.scale_unc_rel * sample_normal(rng));
  q.shape = p.shape * (1.0 + p.shape_unc_rel * sample_normal(rng));
  if (!(q.scale > 0.0 && q.shape > 0.0)) throw NumericError("perturbed kernel parameter is not positive");
  return q;
}

}  // namespace

DelayUncertainty propagate_delay_uncertainty(const EpiSeries& cases, const EpiSeries& deaths, int t0, int t1,
                                             const KernelSet& kernels, const DeconvConfig& deconv,
                                             const UncertaintyConfig& cfg) {
  if (cfg.n_mc < 100) throw ValidationError("delay uncertainty needs n_mc >= 100");
  if (t0 > t1) throw ValidationError("read-out window needs t0 <= t1");
  validate_series(cases);
  validate_series(deaths);
  const auto deaths_cum = deaths.cumulative();
  const double offset = static_cast<double>((cases.start - deaths.start).count());
  const int t_mid = (t0 + t1) / 2;

  DelayUncertainty out;
  const auto central = combine_kernels(kernels);
  const auto dec = deconvolve(cases, central.k_c, deconv);
  out.lambda_r = dec.lambda_r;
  std::vector<double> rows;
  for (int t = t0; t <= t1; ++t) rows.push_back(t + dec.pad_days);
  out.surface = psi_surface(dec.x, central.k_f, central.k_s, rows, cfg.dt_max, cfg.dt_step);
  const auto mid_row = static_cast<std::size_t>(t_mid - t0);
  out.delay = solve_optimal_delay(out.surface, mid_row);
  out.deaths_central = window_deaths(deaths_cum, offset, t0, t1, out.delay.dt);

  DeconvConfig fixed = deconv;
  fixed.lambda_r = dec.lambda_r;
  const std::size_t cells = out.surface.value.size();
  const auto n_mc = static_cast<std::size_t>(cfg.n_mc);
  std::vector<double> rep_psi(n_mc * cells, 0.0), rep_dt(n_mc, 0.0), rep_deaths(n_mc, 0.0);
  std::vector<char> ok(n_mc, 0);

  for_each_index(cfg.exec, cfg.n_mc, [&](std::int64_t r) {
    Philox rng(cfg.seed, static_cast<std::uint64_t>(r));
    try {
      KernelSet ks = kernels;
      if (cfg.perturb_kernels)
        for (auto* p : {&ks.io, &ks.oc, &ks.os, &ks.cf}) *p = perturb(*p, rng);
      EpiSeries y = cases;
      if (cfg.poisson)
        for (auto& v : y.daily) v = static_cast<double>(sample_poisson(rng, v));
      const auto k = combine_kernels(ks);
      DeconvConfig dc = fixed;
      dc.pad_days = std::max(deconv.pad_days, k.k_c.support());
      const auto d = deconvolve(y, k.k_c, dc);
      std::vector<double> t_rows;
      for (int t = t0; t <= t1; ++t) t_rows.push_back(t + d.pad_days);
      const auto surf = psi_surface(d.x, k.k_f, k.k_s, t_rows, cfg.dt_max, cfg.dt_step);
      const double dt = solve_delay_row(surf.dt, surf.row(mid_row));
      std::copy(surf.value.begin(), surf.value.end(), rep_psi.begin() + static_cast<std::ptrdiff_t>(r * cells));
      rep_dt[static_cast<std::size_t>(r)] = dt;
      rep_deaths[static_cast<std::size_t>(r)] = window_deaths(deaths_cum, offset, t0, t1, dt);
      ok[static_cast<std::size_t>(r)] = 1;
    } catch (const std::exception&) {
      // dropped and counted below
    }
  });

  std::vector<std::size_t> good;
  for (std::size_t r = 0; r < n_mc; ++r)
    if (ok[r]) good.push_back(r);
  out.used = static_cast<int>(good.size());
  out.failed = cfg.n_mc - out.used;
  if (out.failed * 10 > cfg.n_mc)
    throw NumericError("delay uncertainty: " + std::to_string(out.failed) + " of " + std::to_string(cfg.n_mc) +
                       " replicates failed");

  std::vector<double> buf(good.size());
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t i = 0; i < good.size(); ++i) buf[i] = rep_psi[good[i] * cells + c];
    std::sort(buf.begin(), buf.end());
    // Bands always contain the central curve.
    out.surface.lo95[c] = std::min(out.surface.value[c], num::nearest_rank_quantile(buf, 0.025));
    out.surface.hi95[c] = std::max(out.surface.value[c], num::nearest_rank_quantile(buf, 0.975));
  }
  std::vector<double> dts, nfs;
  for (auto r : good) dts.push_back(rep_dt[r]), nfs.push_back(rep_deaths[r]);
  std::sort(dts.begin(), dts.end());
  out.delay.lo68 = std::min(out.delay.dt, num::nearest_rank_quantile(dts, 0.5 * (1.0 - kLevel68)));
  out.delay.hi68 = std::max(out.delay.dt, num::nearest_rank_quantile(dts, 0.5 * (1.0 + kLevel68)));
  const double mean = std::accumulate(nfs.begin(), nfs.end(), 0.0) / static_cast<double>(nfs.size());
  double var = 0.0;
  for (double v : nfs) var += (v - mean) * (v - mean);
  var /= static_cast<double>(std::max<std::size_t>(1, nfs.size() - 1));
  out.delta_gamma = out.deaths_central > 0.0 ? std::sqrt(var) / out.deaths_central : 0.0;
  return out;
}

}  // namespace ifr
