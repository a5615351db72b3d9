#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ifr/common.hpp"
#include "ifr/parallel.hpp"

namespace ifr {

/// Beta(alpha, beta) prior or posterior. alpha = beta = 0 (Haldane) is
/// accepted as a limiting prior; posteriors must have positive parameters.
struct BetaParams {
  double alpha = 0.5;
  double beta = 0.5;

  static BetaParams jeffreys() { return {0.5, 0.5}; }
  static BetaParams flat() { return {1.0, 1.0}; }
  static BetaParams haldane() { return {0.0, 0.0}; }

  double mean() const { return alpha / (alpha + beta); }
};

BetaParams parse_beta_prior(std::string_view name);

BetaParams beta_posterior(const CountPair& c, const BetaParams& prior);

/// Density sampled on a strictly increasing grid.
struct GridDensity {
  std::vector<double> grid;
  std::vector<double> mass;
  bool normalized = false;

  double integral() const;
  void normalize();
  std::vector<double> cdf() const;  // trapezoid, normalized to end at 1
  double mean() const;
  double mode() const;              // grid point of the maximum
  double quantile(double q) const;  // inverse of cdf() by linear interpolation
  double value_at(double x) const;  // linear interpolation, 0 outside the grid
  GridDensity resampled(const std::vector<double>& new_grid) const;

  /// Endpoint density below rel_tol * peak on both ends.
  bool tails_covered(double rel_tol = 1e-8) const;
};

struct GridSpec {
  std::size_t points = 4096;
  // Explicit bounds; when absent they are derived from the Katz interval
  // widened tenfold in log space and clipped to the posterior supports.
  std::optional<double> r_min;
  std::optional<double> r_max;
};

/// Posterior density of r = p1/p2 under independent Beta posteriors:
/// f(r) = ∫ y f1(r y) f2(y) dy.
GridDensity ratio_posterior(const RatioCounts& c, const BetaParams& prior1, const BetaParams& prior2,
                            const GridSpec& spec = {}, Exec exec = Exec::parallel);

enum class ScaleFamily { normal, gamma };

/// Prior on a multiplicative count scale (γ on k1, λ on k2).
struct ScalePrior {
  double mu = 1.0;
  double sigma = 0.0;
  ScaleFamily family = ScaleFamily::normal;
};

/// Ratio posterior with k1 -> γ k1 and k2 -> λ k2 marginalized over the
/// scale priors (truncated at γ, λ >= 1e-6).
GridDensity dressed_ratio_posterior(const RatioCounts& c, const BetaParams& prior1, const BetaParams& prior2,
                                    const ScalePrior& gamma, const ScalePrior& lambda, const GridSpec& spec = {},
                                    Diagnostics* diag = nullptr, Exec exec = Exec::parallel);

struct CredibleInterval {
  IntervalEstimate ci;  // equal-tailed; point = posterior mean
  double mode = 0.0;
  double mean = 0.0;
  double median = 0.0;
};

CredibleInterval credible_interval(const GridDensity& d, double level);

/// Two-column CSV (r,density) with a header line.
void write_density_csv(std::ostream& os, const GridDensity& d);

}  // namespace ifr
