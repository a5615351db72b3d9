#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ifr/bayes.hpp"
#include "ifr/common.hpp"
#include "ifr/fusion.hpp"
#include "ifr/interval.hpp"
#include "ifr/parallel.hpp"
#include "ifr/testerr.hpp"
#include "ifr/timeflow.hpp"

namespace ifr {

// --- time series ------------------------------------------------------------

struct TimeSeriesSet {
  EpiSeries cases;
  EpiSeries deaths;
  std::optional<EpiSeries> tests;
};

/// CSV with header date,daily_cases,daily_deaths[,daily_tests], one row per
/// consecutive day.
TimeSeriesSet parse_timeseries(std::istream& is, const std::string& source = "<stream>");
TimeSeriesSet load_timeseries(const std::string& path);

struct TestPeriod {
  Date start{};
  Date end{};
  int days() const { return static_cast<int>((end - start).count()) + 1; }
};

/// Mean of cumulative deaths F(t + dt) over t in the test period, rounded to
/// the nearest integer.
std::int64_t moving_avg_deaths(const EpiSeries& deaths, const TestPeriod& period, int dt);

/// Unrounded variant of moving_avg_deaths.
double moving_avg_deaths_exact(const EpiSeries& deaths, const TestPeriod& period, int dt);

// --- study configuration ----------------------------------------------------------

/// Delay read-out supplied by configuration instead of deconvolution.
struct DelayOverride {
  double dt = 0.0;
  double lo68 = 0.0;
  double hi68 = 0.0;
  double delta_gamma = 0.0;  // relative
};

struct StudyDataset {
  std::string name;
  double population = 0.0;
  double tests = 0.0;
  double positives = 0.0;
  bool positives_corrected = true;  // false: raw counts, inverted with tc
  TestPeriod period;
  TestCharacteristics tc;
  std::optional<std::string> timeseries;  // CSV path
  std::map<int, double> fixed_deaths;     // dt -> n_F when no series is bundled
  std::optional<int> fixed_delay;         // used instead of deconvolution
  std::optional<DelayOverride> adaptive;

  void validate() const;
  /// Corrected positive count used as k2.
  double corrected_positives() const;
};

/// How MoM / NL study estimates are formed from each dataset.
enum class StudyPoint { count_mle, posterior_mean };

struct PipelineConfig {
  std::vector<StudyDataset> datasets;
  std::vector<int> fixed_dts{0, 7, 14, 21};
  bool adaptive = true;
  std::uint64_t seed = 0;
  BetaParams prior = BetaParams::jeffreys();
  std::size_t grid_points = 4096;
  StudyPoint study_point = StudyPoint::count_mle;
  SeReduction se_reduction = SeReduction::cr68_half_width;
  // s_j from the posterior without scale priors (true) or from the dressed one.
  bool se_from_statistical = true;
  std::optional<KernelSet> kernels;
  DeconvConfig deconv;
  UncertaintyConfig uncertainty;
  Exec exec = Exec::parallel;
};

/// JSON study configuration. Relative paths resolve against the file's
/// directory.
PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::string& json_text, const std::string& base_dir = ".");

/// Stable 64-bit FNV-1a hash, used to derive per-dataset seeds.
std::uint64_t name_hash(const std::string& s);

// --- pipeline -----------------------------------------------------------------------

/// One read-out column ("dt0", "dt7", ..., "adaptive") for one dataset.
struct DatasetColumn {
  std::string column;
  double dt = 0.0;
  double dt_lo68 = 0.0, dt_hi68 = 0.0;
  double n_f = 0.0;
  double delta_gamma = 0.0;
  double delta_lambda = 0.0;
  std::string delay_source;  // fixed, deconvolution, configured, fixed_delay
  GridDensity posterior;
  CredibleInterval cr68, cr95;
  StudyEstimate estimate;
  RatioCounts counts;
};

struct DatasetResult {
  std::string name;
  double delta_lambda = 0.0;
  std::vector<DatasetColumn> columns;
  // (column, reason) for each column that could not be produced.
  std::vector<std::pair<std::string, std::string>> skipped;
  std::vector<std::string> warnings;
  const DatasetColumn* column(const std::string& key) const;
};

struct FusedColumn {
  std::string column;
  std::vector<std::string> datasets;
  std::vector<SummaryRow> rows;
  std::vector<std::string> warnings;
  std::optional<std::string> skipped;
};

struct PipelineResult {
  std::vector<DatasetResult> datasets;
  std::vector<FusedColumn> fused;
};

/// Column keys in output order.
std::vector<std::string> pipeline_columns(const PipelineConfig& cfg);

/// Per-dataset posteriors for every column, then all combination strategies
/// per column. A dataset or column that fails is recorded as skipped.
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// dataset,n_P,n_T,positives,n_F(<col>)...
void write_counts_csv(std::ostream& os, const PipelineConfig& cfg, const PipelineResult& r);
/// dataset,column,dt,n_F,delta_gamma,delta_lambda,mode,mean,cr68,cr95 (percent).
void write_dataset_csv(std::ostream& os, const PipelineResult& r);
/// column,method,mode,mean,q68,q95,interval (percent).
void write_fused_csv(std::ostream& os, const PipelineResult& r);
/// dataset,dt,dt_lo68,dt_hi68,delta_gamma,delta_lambda,source (percent for the deltas).
void write_delay_csv(std::ostream& os, const PipelineResult& r);
/// dataset,column,reason.
void write_skipped_csv(std::ostream& os, const PipelineResult& r);

/// Writes counts.csv, datasets.csv, fused.csv, delays.csv, skipped.csv and,
/// when `densities` is set, one density CSV per dataset and column.
void write_pipeline_outputs(const std::string& dir, const PipelineConfig& cfg, const PipelineResult& r,
                            bool densities = true);

// --- extrapolation ------------------------------------------------------------------------

struct InfectedEstimate {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool upper_unbounded = false;  // IFR lower bound at 0
};

/// Infected count deaths / IFR; the upper IFR endpoint maps to the lower count.
InfectedEstimate infected_from_ifr(const IntervalEstimate& ifr, double deaths);

// --- coverage -----------------------------------------------------------------------------

enum class CoverageMode { exact, mc };

CoverageMode parse_coverage_mode(std::string_view s);

struct CoverageConfig {
  BinomialMethod method = BinomialMethod::wald;
  std::int64_t n = 100;
  std::vector<double> p_grid;  // empty: 0.001 .. 0.999 step 0.001
  double level = 0.95;
  CoverageMode mode = CoverageMode::exact;
  std::int64_t mc_samples = 100000;
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;
};

struct CoverageReport {
  std::string estimator;
  std::int64_t n = 0;
  double level = 0.0;
  CoverageMode mode = CoverageMode::exact;
  std::vector<double> p;
  std::vector<double> coverage;
  std::vector<double> mean_width;
  // Mean endpoints relative to the true p: E[L]/p - 1 and E[U]/p - 1.
  std::vector<double> rel_lower;
  std::vector<double> rel_upper;
};

std::vector<double> default_p_grid(double step = 0.001);

/// Exact mode sums Binom(n, p) weights over the k whose interval holds p;
/// MC mode samples k with one counter-based stream per grid point.
CoverageReport coverage_simulation(const CoverageConfig& cfg);

void write_coverage_csv(std::ostream& os, const CoverageReport& r);

}  // namespace ifr
