#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ifr/bayes.hpp"
#include "ifr/common.hpp"
#include "ifr/parallel.hpp"

namespace ifr {

/// One study's observed IFR r_j with standard error s_j and weight w_j.
struct StudyEstimate {
  std::string name;
  double r = 0.0;
  double s = 1.0;
  double w = 1.0;
};

/// How a posterior density is reduced to (r_j, s_j).
enum class SeReduction { cr68_half_width, posterior_sd };

SeReduction parse_se_reduction(std::string_view name);

/// r_j = posterior mean; s_j = half the CR68 width or the posterior sd.
StudyEstimate estimate_from_density(std::string name, const GridDensity& d,
                                    SeReduction red = SeReduction::cr68_half_width);

struct RandomEffectsFit {
  std::string method;
  double r_hat = 0.0;
  double delta_sq = 0.0;  // heterogeneity, >= 0
  double se_r = 0.0;      // (sum of final weights)^(-1/2)
  int iterations = 0;
  // Gaussian intervals r_hat +- z se_r.
  IntervalEstimate q68;
  IntervalEstimate q95;
  // Normal-likelihood fit only: profile-likelihood intervals at 95%.
  std::optional<IntervalEstimate> r_profile95;
  std::optional<IntervalEstimate> delta_sq_profile95;
};

/// Two-step DerSimonian-Laird moment estimator iterated to convergence.
RandomEffectsFit mom_combine(const std::vector<StudyEstimate>& est, Diagnostics* diag = nullptr);

/// ln L(r, Delta^2) of the normal-normal hierarchy (marginal N(r, s^2 + Delta^2)).
double nl_loglik(const std::vector<StudyEstimate>& est, double r, double delta_sq);

/// Maximum-likelihood (r, Delta^2) with profile intervals.
RandomEffectsFit nl_fit(const std::vector<StudyEstimate>& est, Diagnostics* diag = nullptr);

/// 2 [ln L_max - ln L(r, Delta^2)] on a grid, for chi2 (2 dof) contours.
struct LikelihoodGrid {
  std::vector<double> r;
  std::vector<double> delta_sq;
  std::vector<double> deviance;  // row-major [r][delta_sq]
};

LikelihoodGrid nl_deviance_grid(const std::vector<StudyEstimate>& est, const RandomEffectsFit& fit, double r_lo,
                                double r_hi, double d_lo, double d_hi, std::size_t nr, std::size_t nd);

struct FusedDensity {
  GridDensity density;
  std::string method;
  std::vector<double> weights;  // normalized
};

/// Common grid spanning all inputs: log-spaced when every grid is positive.
std::vector<double> common_grid(const std::vector<GridDensity>& ds, std::size_t points = 4096);

/// 1-D Wasserstein barycenter: weighted average of the quantile functions on
/// n_quantiles uniform levels, differentiated back to a density.
FusedDensity ot_barycenter(const std::vector<GridDensity>& ds, std::vector<double> weights,
                           std::size_t n_quantiles = 4096, std::optional<std::vector<double>> grid = std::nullopt);

/// Weighted arithmetic mean of densities (mixture).
FusedDensity mean_of_posteriors(const std::vector<GridDensity>& ds, std::vector<double> weights,
                                std::optional<std::vector<double>> grid = std::nullopt);

/// Normalized weighted geometric product of densities. Weights are used as
/// given (not normalized) so unit weights give the plain product.
FusedDensity product_of_posteriors(const std::vector<GridDensity>& ds, const std::vector<double>& weights,
                                   std::optional<std::vector<double>> grid = std::nullopt);

struct JointLlrResult {
  double r_hat = 0.0;
  IntervalEstimate ci;
  std::vector<double> r_grid;
  std::vector<double> deviance;  // summed curve minus its minimum
  // Index pairs whose single-dataset intervals do not overlap.
  std::vector<std::pair<std::size_t, std::size_t>> disjoint_pairs;
  std::vector<std::string> warnings;
};

/// Sum of per-dataset profile LLR curves, minimized over r; interval from the
/// chi2 (1 dof) quantile.
JointLlrResult joint_llr_combine(const std::vector<RatioCounts>& data, double level, Exec exec = Exec::parallel);

/// Summed profile deviance sum_j LLR_j(r).
double joint_llr_curve(const std::vector<RatioCounts>& data, double r);

/// One summary line: mode, mean and the 68% / 95% intervals.
struct SummaryRow {
  std::string method;
  double mode = 0.0;
  double mean = 0.0;
  double q68_lo = 0.0, q68_hi = 0.0;
  double q95_lo = 0.0, q95_hi = 0.0;
  // "density" (equal-tailed quantiles), "gaussian" or "likelihood".
  std::string interval_kind;
};

SummaryRow summarize(const FusedDensity& f);
SummaryRow summarize(const RandomEffectsFit& f);
SummaryRow summarize(const JointLlrResult& r68, const JointLlrResult& r95);

/// CSV "method,mode,mean,q68_lo,q68_hi,q95_lo,q95_hi,interval" with values
/// multiplied by `scale` (100 for percent).
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows, double scale = 1.0);

/// Two-column density CSV reader matching write_density_csv.
GridDensity read_density_csv(std::istream& is);

}  // namespace ifr
