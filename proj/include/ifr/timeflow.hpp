#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ifr/common.hpp"
#include "ifr/parallel.hpp"

namespace ifr {

using Date = std::chrono::sys_days;

/// Parse an ISO-8601 calendar date (YYYY-MM-DD).
Date parse_date(std::string_view s);
std::string format_date(Date d);

enum class SeriesKind { cases, deaths, infections, tests, seroprevalence };

/// Daily counts on a contiguous grid starting at `start`.
struct EpiSeries {
  Date start{};
  std::vector<double> daily;
  SeriesKind kind = SeriesKind::cases;

  std::size_t size() const { return daily.size(); }
  Date date_at(std::size_t i) const { return start + std::chrono::days(static_cast<int>(i)); }
  /// Day offset of `d` from start (may be negative or beyond the end).
  std::int64_t offset_of(Date d) const { return (d - start).count(); }
  /// Running sum; entry i includes day i.
  std::vector<double> cumulative() const;
};

/// Throws ValidationError on negative or non-finite entries.
void validate_series(const EpiSeries& s);

/// Discretized causal delay pdf on days 0..support().
struct DelayKernel {
  std::string label;
  double scale = 0.0;  // Weibull scale; moment-matched for combined kernels
  double shape = 0.0;  // Weibull shape
  std::vector<double> pdf;
  double truncated_mass = 0.0;  // continuous mass beyond t_max before renormalization

  int support() const { return static_cast<int>(pdf.size()) - 1; }
  double mean() const;
  double sd() const;
};

/// Weibull pdf integrated over day bins centred on integers: bin 0 is
/// [0, 0.5), bin t > 0 is [t - 0.5, t + 0.5). Renormalized to sum 1.
DelayKernel weibull_kernel(double scale, double shape, int t_max = 60, std::string label = {},
                           Diagnostics* diag = nullptr);

/// Unit mass at day `at`.
DelayKernel delta_kernel(int at, std::string label = {});

/// Exponential decay with the given half-life (Weibull with shape 1).
DelayKernel exponential_kernel(double half_life, int t_max, std::string label = {});

/// Weibull (scale, shape) with the given mean and standard deviation.
std::pair<double, double> weibull_from_moments(double mean, double sd);

/// Discrete convolution a * b on the extended support, renormalized.
DelayKernel convolve_kernels(const DelayKernel& a, const DelayKernel& b);

/// (K * s)(t) for t on the input grid extended by the kernel support.
EpiSeries convolve_series(const DelayKernel& k, const EpiSeries& s);

struct DeconvConfig {
  // Regularization strength; chosen by select_lambda() when absent.
  std::optional<double> lambda_r;
  int derivative_order = 2;  // L matrix: 0 identity, 1 first, 2 second difference
  int pad_days = -1;         // < 0: kernel support length
  std::uint64_t seed = 0;
  int max_iter = 0;  // <= 0: 3 * unknowns
  // Ladder searched for the smallest non-oscillating lambda.
  std::vector<double> lambda_grid{0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0};
};

struct DeconvResult {
  // Infection rate on the padded grid; starts pad_days before the input.
  EpiSeries x;
  double lambda_r = 0.0;
  int pad_days = 0;
  int iterations = 0;
  double residual_norm = 0.0;  // ||A x - y|| on the padded measurement vector
  double penalty_norm = 0.0;   // ||L x||
};

/// Non-negative Tikhonov deconvolution of y = K * x with the measurement
/// vector zero-padded before the first count.
DeconvResult deconvolve(const EpiSeries& y, const DelayKernel& k, const DeconvConfig& cfg = {});

/// Second differences of x that change sign between neighbours while both
/// exceed rel * max(x) in magnitude.
bool has_oscillation(const std::vector<double>& x, double rel = 0.05);

/// Smallest lambda on cfg.lambda_grid whose solution has no oscillation
/// (the largest grid value when none qualifies).
double select_lambda(const EpiSeries& y, const DelayKernel& k, const DeconvConfig& cfg);

/// psi(t, dt) = (K_F * I)(t + dt) / (K_S * I)(t) with I the cumulative of the
/// daily infection rate x_hat. t and dt are days; t counts from x_hat.start.
/// Fractional arguments interpolate the cumulative curves linearly.
double psi(double t, double dt, const EpiSeries& x_hat, const DelayKernel& k_f, const DelayKernel& k_s);

struct PsiSurface {
  std::vector<double> t;   // days from the infection-series start
  std::vector<double> dt;  // delay grid
  // Row-major [t][dt].
  std::vector<double> value;
  std::vector<double> lo95;
  std::vector<double> hi95;

  double at(std::size_t it, std::size_t idt) const { return value[it * dt.size() + idt]; }
  std::vector<double> row(std::size_t it) const;
};

PsiSurface psi_surface(const EpiSeries& x_hat, const DelayKernel& k_f, const DelayKernel& k_s,
                       const std::vector<double>& t, double dt_max = 60.0, double dt_step = 0.1);

struct DelayEstimate {
  double dt = 0.0;
  double lo68 = 0.0;
  double hi68 = 0.0;
};

/// Smallest dt on the grid where psi reaches 1, by linear interpolation
/// between the bracketing grid points.
double solve_delay_row(const std::vector<double>& dt, const std::vector<double>& psi_row);

/// Central delay at row `it`; the CI68 is left equal to the point value
/// (propagate_delay_uncertainty fills it from perturbed surfaces).
DelayEstimate solve_optimal_delay(const PsiSurface& surface, std::size_t it);

/// Population seroprevalence estimate n_P * k / n_T.
double seroprevalence_count(double n_p, double positives, double n_t);

/// (1/psi) * F(t + dt) / I_S(t).
double corrected_ifr(double deaths_cum, double seroprev_count, double psi_val);

/// Same, reading the cumulative deaths from a daily series at day t + dt
/// (days from deaths.start; fractional days interpolate).
double corrected_ifr(double t, double dt, const EpiSeries& deaths, double seroprev_count, double psi_val);

/// Cumulative series value at fractional day u (linear interpolation;
/// 0 before the start, last value after the end).
double cumulative_at(const std::vector<double>& cum, double u);

struct SeroreversionResult {
  EpiSeries measurable;  // cumulative measurable seroprevalence
  int clipped = 0;       // negative values set to 0
};

/// I~_S = I_S - K_R * I_S with I_S the cumulative of K_S * x_hat.
SeroreversionResult seroreversion_adjust(const EpiSeries& x_hat, const DelayKernel& k_s, const DelayKernel& k_r);

struct KernelParams {
  std::string label;
  double scale = 1.0;
  double shape = 1.0;
  double scale_unc_rel = 0.2;
  double shape_unc_rel = 0.2;
};

/// Component delays: infection->onset, onset->case, onset->seroconversion,
/// case->death.
struct KernelSet {
  KernelParams io, oc, os, cf;
  int t_max = 60;
  bool approximate = true;
};

struct CombinedKernels {
  DelayKernel k_c;  // infection -> case report
  DelayKernel k_s;  // infection -> seroconversion
  DelayKernel k_f;  // infection -> death
};

CombinedKernels combine_kernels(const KernelSet& ks, Diagnostics* diag = nullptr);

/// JSON kernel configuration {"t_max", "approximate", "kernels": [{label,
/// scale, shape, scale_unc_rel, shape_unc_rel}, ...]} with labels
/// I->O, O->C, O->S, C->F.
KernelSet load_kernel_config(const std::string& path);

struct UncertaintyConfig {
  int n_mc = 200;
  std::uint64_t seed = 0;
  bool poisson = true;          // Poisson-fluctuate the case series
  bool perturb_kernels = true;  // Gaussian-perturb the Weibull parameters
  double dt_max = 60.0;
  double dt_step = 0.1;
  Exec exec = Exec::parallel;
};

struct DelayUncertainty {
  PsiSurface surface;  // central values with 95% percentile bands
  DelayEstimate delay;
  double deaths_central = 0.0;  // window-averaged cumulative deaths at the central delay
  double delta_gamma = 0.0;     // relative sd of the read-out deaths across replicates
  double lambda_r = 0.0;
  int used = 0;
  int failed = 0;
};

/// Toy Monte Carlo over kernel parameters and case-count noise. The delay is
/// solved at the middle day of the read-out window [t0, t1] (days from
/// cases.start); deaths are averaged over the window shifted by each
/// replicate's delay.
DelayUncertainty propagate_delay_uncertainty(const EpiSeries& cases, const EpiSeries& deaths, int t0, int t1,
                                             const KernelSet& kernels, const DeconvConfig& deconv,
                                             const UncertaintyConfig& cfg);

}  // namespace ifr
