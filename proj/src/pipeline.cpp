#include "ifr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ifr/ratio.hpp"
#include "ifr/rng.hpp"

namespace ifr {

// --- time series ------------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_count(const std::string& cell, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw ValidationError(where + ": '" + cell + "' is not a number");
  }
  if (used != cell.size()) throw ValidationError(where + ": '" + cell + "' is not a number");
  if (!std::isfinite(v) || v < 0.0) throw ValidationError(where + ": counts must be finite and >= 0");
  return v;
}

}  // namespace

TimeSeriesSet parse_timeseries(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError(source + ": empty time series file");
  const auto header = split_csv(line);
  const bool has_tests = header.size() == 4;
  if (!(header.size() == 3 || has_tests) || header[0] != "date" || header[1] != "daily_cases" ||
      header[2] != "daily_deaths" || (has_tests && header[3] != "daily_tests"))
    throw ValidationError(source + ": header must be date,daily_cases,daily_deaths[,daily_tests]");

  std::vector<Date> dates;
  TimeSeriesSet ts;
  ts.cases.kind = SeriesKind::cases;
  ts.deaths.kind = SeriesKind::deaths;
  EpiSeries tests;
  tests.kind = SeriesKind::tests;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    const std::string where = source + " row " + std::to_string(row);
    if (cells.size() != header.size()) throw ValidationError(where + ": expected " + std::to_string(header.size()) + " columns");
    Date d;
    try {
      d = parse_date(cells[0]);
    } catch (const ValidationError&) {
      throw ValidationError(where + ": malformed date '" + cells[0] + "'");
    }
    dates.push_back(d);
    ts.cases.daily.push_back(parse_count(cells[1], where));
    ts.deaths.daily.push_back(parse_count(cells[2], where));
    if (has_tests) tests.daily.push_back(parse_count(cells[3], where));
  }
  if (dates.empty()) throw ValidationError(source + ": no data rows");

  std::vector<std::string> missing;
  for (std::size_t i = 1; i < dates.size(); ++i) {
    const auto gap = (dates[i] - dates[i - 1]).count();
    if (gap <= 0)
      throw ValidationError(source + ": dates must increase (" + format_date(dates[i]) + " after " +
                            format_date(dates[i - 1]) + ")");
    for (std::int64_t g = 1; g < gap; ++g) missing.push_back(format_date(dates[i - 1] + std::chrono::days(g)));
  }
  if (!missing.empty()) {
    std::string msg = source + ": missing dates:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
    throw ValidationError(msg);
  }
  ts.cases.start = ts.deaths.start = tests.start = dates.front();
  if (has_tests) ts.tests = std::move(tests);
  return ts;
}

TimeSeriesSet load_timeseries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open time series " + path);
  return parse_timeseries(in, path);
}

double moving_avg_deaths_exact(const EpiSeries& deaths, const TestPeriod& period, int dt) {
  if (period.end < period.start) throw ValidationError("test period ends before it starts");
  const auto first = deaths.offset_of(period.start) + dt;
  const auto last = deaths.offset_of(period.end) + dt;
  if (first < 0 || last >= static_cast<std::int64_t>(deaths.size()))
    throw ValidationError("death series " + format_date(deaths.start) + " .. " +
                          format_date(deaths.date_at(deaths.size() - 1)) + " does not cover the shifted window " +
                          format_date(period.start + std::chrono::days(dt)) + " .. " +
                          format_date(period.end + std::chrono::days(dt)));
  const auto cum = deaths.cumulative();
  double s = 0.0;
  for (auto i = first; i <= last; ++i) s += cum[static_cast<std::size_t>(i)];
  return s / static_cast<double>(last - first + 1);
}

std::int64_t moving_avg_deaths(const EpiSeries& deaths, const TestPeriod& period, int dt) {
  return std::llround(moving_avg_deaths_exact(deaths, period, dt));
}

// --- configuration ----------------------------------------------------------------

void StudyDataset::validate() const {
  const std::string p = "dataset " + name + ": ";
  if (name.empty()) throw ValidationError("dataset without a name");
  if (!(population >= 1.0)) throw ValidationError(p + "population must be >= 1");
  if (!(tests >= 1.0)) throw ValidationError(p + "tests must be >= 1");
  if (!(positives >= 0.0) || positives > tests) throw ValidationError(p + "require 0 <= positives <= tests");
  if (period.end < period.start) throw ValidationError(p + "test period ends before it starts");
  tc.validate();
  for (const auto& [dt, nf] : fixed_deaths)
    if (!(nf >= 0.0) || nf > population) throw ValidationError(p + "n_F must lie in [0, population]");
  if (fixed_delay && *fixed_delay < 0) throw ValidationError(p + "fixed_delay must be >= 0");
  if (adaptive && !(adaptive->dt >= 0.0 && adaptive->delta_gamma >= 0.0))
    throw ValidationError(p + "adaptive delay and delta_gamma must be >= 0");
}

double StudyDataset::corrected_positives() const {
  if (positives_corrected) return positives;
  return invert_prevalence(positives / tests, tc) * tests;
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

using nlohmann::json;

std::string resolve(const std::string& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (std::filesystem::path(base) / path).lexically_normal().string();
}

TestCharacteristics read_tc(const json& j, TestCharacteristics tc) {
  tc.v = j.value("sensitivity", tc.v);
  tc.s = j.value("specificity", tc.s);
  tc.sigma_v = j.value("sigma_sensitivity", tc.sigma_v);
  tc.sigma_s = j.value("sigma_specificity", tc.sigma_s);
  tc.validate();
  return tc;
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("study config: ") + e.what());
  }
  PipelineConfig cfg;
  try {
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.adaptive = j.value("adaptive", true);
    if (j.contains("fixed_dts")) cfg.fixed_dts = j["fixed_dts"].get<std::vector<int>>();
    cfg.grid_points = j.value("grid_points", std::size_t{4096});
    cfg.prior = parse_beta_prior(j.value("prior", std::string("jeffreys")));
    const auto sp = j.value("study_point", std::string("count_mle"));
    if (sp == "count_mle") cfg.study_point = StudyPoint::count_mle;
    else if (sp == "posterior_mean") cfg.study_point = StudyPoint::posterior_mean;
    else throw ValidationError("study_point must be count_mle or posterior_mean");
    cfg.se_reduction = parse_se_reduction(j.value("se_reduction", std::string("cr68")));
    const auto ss = j.value("se_source", std::string("statistical"));
    if (ss != "statistical" && ss != "dressed") throw ValidationError("se_source must be statistical or dressed");
    cfg.se_from_statistical = ss == "statistical";
    if (j.contains("kernels")) cfg.kernels = load_kernel_config(resolve(base_dir, j["kernels"].get<std::string>()));
    if (j.contains("uncertainty")) {
      const auto& u = j["uncertainty"];
      cfg.uncertainty.n_mc = u.value("n_mc", cfg.uncertainty.n_mc);
      cfg.uncertainty.dt_max = u.value("dt_max", cfg.uncertainty.dt_max);
      cfg.uncertainty.dt_step = u.value("dt_step", cfg.uncertainty.dt_step);
    }
    TestCharacteristics global;
    if (j.contains("test_characteristics")) global = read_tc(j["test_characteristics"], global);

    if (!j.contains("datasets") || !j["datasets"].is_array()) throw ValidationError("study config needs a datasets array");
    for (const auto& d : j["datasets"]) {
      StudyDataset s;
      s.name = d.at("name").get<std::string>();
      s.population = d.at("population").get<double>();
      s.tests = d.at("tests").get<double>();
      s.positives = d.at("positives").get<double>();
      s.positives_corrected = d.value("positives_corrected", true);
      const auto& per = d.at("test_period");
      s.period.start = parse_date(per.at(0).get<std::string>());
      s.period.end = parse_date(per.at(1).get<std::string>());
      s.tc = d.contains("test_characteristics") ? read_tc(d["test_characteristics"], global) : global;
      if (d.contains("timeseries")) s.timeseries = resolve(base_dir, d["timeseries"].get<std::string>());
      if (d.contains("deaths"))
        for (const auto& [k, v] : d["deaths"].items()) s.fixed_deaths[std::stoi(k)] = v.get<double>();
      if (d.contains("fixed_delay")) s.fixed_delay = d["fixed_delay"].get<int>();
      if (d.contains("adaptive")) {
        const auto& a = d["adaptive"];
        DelayOverride o;
        o.dt = a.at("dt").get<double>();
        o.lo68 = a.value("lo68", o.dt);
        o.hi68 = a.value("hi68", o.dt);
        o.delta_gamma = a.value("delta_gamma", 0.0);
        s.adaptive = o;
      }
      s.validate();
      cfg.datasets.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("study config: ") + e.what());
  }
  if (cfg.datasets.empty()) throw ValidationError("study config has no datasets");
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open study config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

// --- pipeline -------------------------------------------------------------------

const DatasetColumn* DatasetResult::column(const std::string& key) const {
  for (const auto& c : columns)
    if (c.column == key) return &c;
  return nullptr;
}

std::vector<std::string> pipeline_columns(const PipelineConfig& cfg) {
  std::vector<std::string> cols;
  for (int dt : cfg.fixed_dts) cols.push_back("dt" + std::to_string(dt));
  if (cfg.adaptive) cols.push_back("adaptive");
  return cols;
}

namespace {

// n_F at a possibly fractional delay from the configured table: linear
// interpolation, held at the last entry beyond it.
double deaths_from_table(const StudyDataset& d, double dt, std::vector<std::string>& warnings) {
  if (d.fixed_deaths.empty()) throw ValidationError("no death series and no death counts configured");
  const auto& t = d.fixed_deaths;
  if (dt < t.begin()->first) throw ValidationError("delay below the first configured death count");
  if (dt > t.rbegin()->first) {
    warnings.push_back("delay " + std::to_string(dt) + " beyond the death table; last entry held");
    return t.rbegin()->second;
  }
  auto hi = t.lower_bound(static_cast<int>(std::ceil(dt)));
  if (hi->first == dt || hi == t.begin()) return hi->second;
  auto lo = std::prev(hi);
  const double w = (dt - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

struct Readout {
  double dt = 0, lo68 = 0, hi68 = 0, n_f = 0, delta_gamma = 0;
  std::string source;
};

Readout fixed_readout(const StudyDataset& d, const std::optional<TimeSeriesSet>& ts, int dt,
                      std::vector<std::string>& warnings) {
  Readout r;
  r.dt = r.lo68 = r.hi68 = dt;
  auto it = d.fixed_deaths.find(dt);
  if (it != d.fixed_deaths.end()) {
    r.n_f = it->second;
    r.source = "configured";
  } else if (ts) {
    r.n_f = static_cast<double>(moving_avg_deaths(ts->deaths, d.period, dt));
    r.source = "series";
  } else {
    r.n_f = std::round(deaths_from_table(d, dt, warnings));
    r.source = "interpolated";
  }
  return r;
}

Readout adaptive_readout(const PipelineConfig& cfg, const StudyDataset& d, const std::optional<TimeSeriesSet>& ts,
                         std::vector<std::string>& warnings) {
  Readout r;
  auto deaths_at = [&](double dt) {
    if (ts) {
      // Fractional delays interpolate the window average linearly.
      const int lo = static_cast<int>(std::floor(dt));
      const double w = dt - lo;
      const double a = moving_avg_deaths_exact(ts->deaths, d.period, lo);
      const double b = w > 0.0 ? moving_avg_deaths_exact(ts->deaths, d.period, lo + 1) : a;
      return std::round(a + w * (b - a));
    }
    return std::round(deaths_from_table(d, dt, warnings));
  };
  if (d.fixed_delay) {
    r.dt = r.lo68 = r.hi68 = *d.fixed_delay;
    r.n_f = deaths_at(r.dt);
    r.source = "fixed_delay";
    return r;
  }
  if (ts && cfg.kernels) {
    UncertaintyConfig u = cfg.uncertainty;
    u.seed = cfg.seed ^ name_hash(d.name);
    u.exec = Exec::serial;
    const int t0 = static_cast<int>(ts->cases.offset_of(d.period.start));
    const int t1 = static_cast<int>(ts->cases.offset_of(d.period.end));
    const auto du = propagate_delay_uncertainty(ts->cases, ts->deaths, t0, t1, *cfg.kernels, cfg.deconv, u);
    r.dt = du.delay.dt;
    r.lo68 = du.delay.lo68;
    r.hi68 = du.delay.hi68;
    r.n_f = std::round(du.deaths_central);
    r.delta_gamma = du.delta_gamma;
    r.source = "deconvolution";
    return r;
  }
  if (d.adaptive) {
    r.dt = d.adaptive->dt;
    r.lo68 = d.adaptive->lo68;
    r.hi68 = d.adaptive->hi68;
    r.delta_gamma = d.adaptive->delta_gamma;
    r.n_f = deaths_at(r.dt);
    r.source = "configured";
    return r;
  }
  throw ValidationError("adaptive delay needs a time series with kernels, a fixed_delay or a configured delay");
}

DatasetResult process_dataset(const PipelineConfig& cfg, const StudyDataset& d) {
  DatasetResult out;
  out.name = d.name;
  std::optional<TimeSeriesSet> ts;
  if (d.timeseries) ts = load_timeseries(*d.timeseries);
  const double k2 = d.corrected_positives();
  Diagnostics diag;
  out.delta_lambda = renormalize_lambda(k2 / d.tests, d.tests, d.tc, &diag);

  GridSpec spec;
  spec.points = cfg.grid_points;
  auto make_column = [&](const std::string& key, const Readout& ro, bool dress_gamma) {
    DatasetColumn c;
    c.column = key;
    c.dt = ro.dt;
    c.dt_lo68 = ro.lo68;
    c.dt_hi68 = ro.hi68;
    c.n_f = ro.n_f;
    c.delta_gamma = dress_gamma ? ro.delta_gamma : 0.0;
    c.delta_lambda = out.delta_lambda;
    c.delay_source = ro.source;
    c.counts = RatioCounts(ro.n_f, d.population, k2, d.tests);
    const ScalePrior gamma{1.0, c.delta_gamma, ScaleFamily::normal};
    const ScalePrior lambda{1.0, c.delta_lambda, ScaleFamily::normal};
    c.posterior = dressed_ratio_posterior(c.counts, cfg.prior, cfg.prior, gamma, lambda, spec, &diag, Exec::serial);
    c.cr68 = credible_interval(c.posterior, kLevel68);
    c.cr95 = credible_interval(c.posterior, 0.95);

    const GridDensity* se_src = &c.posterior;
    GridDensity statistical;
    if (cfg.se_from_statistical) {
      statistical = ratio_posterior(c.counts, cfg.prior, cfg.prior, spec, Exec::serial);
      se_src = &statistical;
    }
    c.estimate = estimate_from_density(d.name, *se_src, cfg.se_reduction);
    c.estimate.r = cfg.study_point == StudyPoint::count_mle ? c.counts.r_hat() : c.posterior.mean();
    return c;
  };

  for (int dt : cfg.fixed_dts) {
    const std::string key = "dt" + std::to_string(dt);
    try {
      // Fixed read-out delays carry no delay uncertainty.
      out.columns.push_back(make_column(key, fixed_readout(d, ts, dt, out.warnings), false));
    } catch (const std::exception& e) {
      out.skipped.emplace_back(key, e.what());
    }
  }
  if (cfg.adaptive) {
    try {
      out.columns.push_back(make_column("adaptive", adaptive_readout(cfg, d, ts, out.warnings), true));
    } catch (const std::exception& e) {
      out.skipped.emplace_back("adaptive", e.what());
    }
  }
  for (auto& w : diag.warnings) out.warnings.push_back(std::move(w));
  return out;
}

FusedColumn fuse_column(const PipelineConfig& cfg, const PipelineResult& res, const std::string& key) {
  FusedColumn f;
  f.column = key;
  std::vector<GridDensity> post;
  std::vector<StudyEstimate> est;
  std::vector<RatioCounts> counts;
  for (const auto& d : res.datasets)
    if (const auto* c = d.column(key)) {
      f.datasets.push_back(d.name);
      post.push_back(c->posterior);
      est.push_back(c->estimate);
      counts.push_back(c->counts);
    }
  if (post.size() < 2) {
    f.skipped = "fewer than two datasets available";
    return f;
  }
  Diagnostics diag;
  auto guarded = [&](const char* method, auto&& fn) {
    try {
      f.rows.push_back(fn());
    } catch (const std::exception& e) {
      f.warnings.push_back(std::string(method) + ": " + e.what());
    }
  };
  guarded("MoM", [&] { return summarize(mom_combine(est, &diag)); });
  guarded("NL", [&] { return summarize(nl_fit(est, &diag)); });
  guarded("OT", [&] { return summarize(ot_barycenter(post, {})); });
  guarded("OT-invvar", [&] {
    std::vector<double> w;
    for (const auto& e : est) w.push_back(1.0 / (e.s * e.s));
    auto row = summarize(ot_barycenter(post, w));
    row.method = "OT-invvar";
    return row;
  });
  guarded("SUM", [&] { return summarize(mean_of_posteriors(post, {})); });
  guarded("PROD", [&] { return summarize(product_of_posteriors(post, {})); });
  guarded("JointLLR", [&] {
    const auto r68 = joint_llr_combine(counts, kLevel68, cfg.exec);
    const auto r95 = joint_llr_combine(counts, 0.95, cfg.exec);
    if (!r95.disjoint_pairs.empty()) {
      std::string msg = "JointLLR: disjoint single-dataset intervals:";
      for (const auto& [i, j] : r95.disjoint_pairs) msg += " " + f.datasets[i] + "/" + f.datasets[j];
      diag.warnings.push_back(msg);
    }
    return summarize(r68, r95);
  });
  for (auto& w : diag.warnings) f.warnings.push_back(std::move(w));
  return f;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  if (cfg.datasets.empty()) throw ValidationError("pipeline has no datasets");
  PipelineResult res;
  res.datasets.resize(cfg.datasets.size());
  for_each_index(cfg.exec, static_cast<std::int64_t>(cfg.datasets.size()), [&](std::int64_t i) {
    const auto& d = cfg.datasets[static_cast<std::size_t>(i)];
    auto& slot = res.datasets[static_cast<std::size_t>(i)];
    try {
      slot = process_dataset(cfg, d);
    } catch (const std::exception& e) {
      slot = DatasetResult{};
      slot.name = d.name;
      for (const auto& key : pipeline_columns(cfg)) slot.skipped.emplace_back(key, e.what());
    }
  });
  for (const auto& key : pipeline_columns(cfg)) res.fused.push_back(fuse_column(cfg, res, key));
  return res;
}

// --- output ------------------------------------------------------------------------

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace

void write_counts_csv(std::ostream& os, const PipelineConfig& cfg, const PipelineResult& r) {
  const auto cols = pipeline_columns(cfg);
  os << "dataset,n_P,n_T,positives";
  for (const auto& c : cols) os << ",n_F_" << c;
  os << '\n';
  for (std::size_t i = 0; i < cfg.datasets.size(); ++i) {
    const auto& d = cfg.datasets[i];
    os << d.name << ',' << std::setprecision(12) << d.population << ',' << d.tests << ',' << d.corrected_positives();
    for (const auto& c : cols) {
      os << ',';
      if (const auto* col = r.datasets[i].column(c)) os << col->n_f;
    }
    os << '\n';
  }
}

void write_dataset_csv(std::ostream& os, const PipelineResult& r) {
  os << "dataset,column,dt,n_F,delta_gamma,delta_lambda,mode,mean,cr68_lo,cr68_hi,cr95_lo,cr95_hi\n";
  os << std::setprecision(6);
  for (const auto& d : r.datasets)
    for (const auto& c : d.columns)
      os << d.name << ',' << c.column << ',' << c.dt << ',' << c.n_f << ',' << 100 * c.delta_gamma << ','
         << 100 * c.delta_lambda << ',' << 100 * c.cr95.mode << ',' << 100 * c.cr95.mean << ','
         << 100 * c.cr68.ci.lower << ',' << 100 * c.cr68.ci.upper << ',' << 100 * c.cr95.ci.lower << ','
         << 100 * c.cr95.ci.upper << '\n';
}

void write_fused_csv(std::ostream& os, const PipelineResult& r) {
  os << "column,method,mode,mean,q68_lo,q68_hi,q95_lo,q95_hi,interval\n";
  os << std::setprecision(6);
  for (const auto& f : r.fused)
    for (const auto& row : f.rows)
      os << f.column << ',' << row.method << ',' << 100 * row.mode << ',' << 100 * row.mean << ','
         << 100 * row.q68_lo << ',' << 100 * row.q68_hi << ',' << 100 * row.q95_lo << ',' << 100 * row.q95_hi
         << ',' << row.interval_kind << '\n';
}

void write_delay_csv(std::ostream& os, const PipelineResult& r) {
  os << "dataset,dt,dt_lo68,dt_hi68,delta_gamma,delta_lambda,source\n";
  os << std::setprecision(6);
  for (const auto& d : r.datasets)
    if (const auto* c = d.column("adaptive"))
      os << d.name << ',' << c->dt << ',' << c->dt_lo68 << ',' << c->dt_hi68 << ',' << 100 * c->delta_gamma << ','
         << 100 * c->delta_lambda << ',' << c->delay_source << '\n';
}

void write_skipped_csv(std::ostream& os, const PipelineResult& r) {
  os << "dataset,column,reason\n";
  for (const auto& d : r.datasets)
    for (const auto& [col, why] : d.skipped) os << d.name << ',' << col << ',' << csv_quote(why) << '\n';
  for (const auto& f : r.fused) {
    if (f.skipped) os << "*," << f.column << ',' << csv_quote(*f.skipped) << '\n';
    for (const auto& w : f.warnings) os << "*," << f.column << ',' << csv_quote(w) << '\n';
  }
}

void write_pipeline_outputs(const std::string& dir, const PipelineConfig& cfg, const PipelineResult& r,
                            bool densities) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir + ": " + ec.message());
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name);
    if (!f) throw ValidationError("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("counts.csv");
    write_counts_csv(f, cfg, r);
  }
  {
    auto f = open("datasets.csv");
    write_dataset_csv(f, r);
  }
  {
    auto f = open("fused.csv");
    write_fused_csv(f, r);
  }
  {
    auto f = open("delays.csv");
    write_delay_csv(f, r);
  }
  {
    auto f = open("skipped.csv");
    write_skipped_csv(f, r);
  }
  if (densities)
    for (const auto& d : r.datasets)
      for (const auto& c : d.columns) {
        auto f = open("density_" + d.name + "_" + c.column + ".csv");
        write_density_csv(f, c.posterior);
      }
}

// --- extrapolation ----------------------------------------------------------------------

InfectedEstimate infected_from_ifr(const IntervalEstimate& ifr, double deaths) {
  if (!(deaths >= 0.0) || !std::isfinite(deaths)) throw ValidationError("deaths must be finite and >= 0");
  if (!(ifr.upper > 0.0) || ifr.upper > 1.0 || ifr.lower < 0.0 || ifr.lower > ifr.upper)
    throw ValidationError("IFR interval must satisfy 0 <= lower <= upper <= 1 with upper > 0");
  if (!(ifr.point > 0.0) || ifr.point < ifr.lower || ifr.point > ifr.upper)
    throw ValidationError("IFR point must be positive and inside its interval");
  InfectedEstimate e;
  e.point = deaths / ifr.point;
  e.lower = deaths / ifr.upper;
  if (ifr.lower > 0.0) {
    e.upper = deaths / ifr.lower;
  } else {
    e.upper = std::numeric_limits<double>::infinity();
    e.upper_unbounded = true;
  }
  return e;
}

// --- coverage ---------------------------------------------------------------------------

CoverageMode parse_coverage_mode(std::string_view s) {
  if (s == "exact") return CoverageMode::exact;
  if (s == "mc") return CoverageMode::mc;
  throw ValidationError("coverage mode must be exact or mc");
}

std::vector<double> default_p_grid(double step) {
  if (!(step > 0.0 && step < 0.5)) throw ValidationError("p grid step must lie in (0, 0.5)");
  std::vector<double> g;
  const auto m = static_cast<std::int64_t>(std::floor(1.0 / step + 1e-9));
  for (std::int64_t i = 1; i < m; ++i) g.push_back(static_cast<double>(i) * step);
  return g;
}

CoverageReport coverage_simulation(const CoverageConfig& cfg) {
  check_level(cfg.level);
  if (cfg.n < 1) throw ValidationError("coverage needs n >= 1");
  if (cfg.mode == CoverageMode::mc && cfg.mc_samples < 1) throw ValidationError("coverage needs mc_samples >= 1");
  CoverageReport r;
  r.estimator = to_string(cfg.method);
  r.n = cfg.n;
  r.level = cfg.level;
  r.mode = cfg.mode;
  r.p = cfg.p_grid.empty() ? default_p_grid() : cfg.p_grid;
  for (double p : r.p)
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("coverage p values must lie in (0, 1)");

  // One interval per possible outcome.
  const auto n = cfg.n;
  std::vector<double> lo(static_cast<std::size_t>(n + 1)), hi(lo.size());
  for_each_index(cfg.exec, n + 1, [&](std::int64_t k) {
    const auto ci = binomial_interval(cfg.method, CountPair(k, n), cfg.level);
    lo[static_cast<std::size_t>(k)] = ci.lower;
    hi[static_cast<std::size_t>(k)] = ci.upper;
  });
  std::vector<double> lg(static_cast<std::size_t>(n + 1));
  for (std::int64_t k = 0; k <= n; ++k)
    lg[static_cast<std::size_t>(k)] = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);

  const auto m = static_cast<std::int64_t>(r.p.size());
  r.coverage.resize(r.p.size());
  r.mean_width.resize(r.p.size());
  r.rel_lower.resize(r.p.size());
  r.rel_upper.resize(r.p.size());
  for_each_index(cfg.exec, m, [&](std::int64_t i) {
    const double p = r.p[static_cast<std::size_t>(i)];
    double cov = 0.0, width = 0.0, el = 0.0, eu = 0.0;
    auto add = [&](std::int64_t k, double w) {
      const auto kk = static_cast<std::size_t>(k);
      if (lo[kk] <= p && p <= hi[kk]) cov += w;
      width += w * (hi[kk] - lo[kk]);
      el += w * lo[kk];
      eu += w * hi[kk];
    };
    if (cfg.mode == CoverageMode::exact) {
      const double lp = std::log(p), lq = std::log1p(-p);
      for (std::int64_t k = 0; k <= n; ++k)
        add(k, std::exp(lg[static_cast<std::size_t>(k)] + static_cast<double>(k) * lp +
                        static_cast<double>(n - k) * lq));
    } else {
      Philox rng(cfg.seed, static_cast<std::uint64_t>(i));
      std::binomial_distribution<std::int64_t> draw(n, p);
      const double w = 1.0 / static_cast<double>(cfg.mc_samples);
      for (std::int64_t s = 0; s < cfg.mc_samples; ++s) add(draw(rng), w);
    }
    const auto ii = static_cast<std::size_t>(i);
    r.coverage[ii] = std::min(1.0, cov);
    r.mean_width[ii] = width;
    r.rel_lower[ii] = el / p - 1.0;
    r.rel_upper[ii] = eu / p - 1.0;
  });
  return r;
}

void write_coverage_csv(std::ostream& os, const CoverageReport& r) {
  os << "estimator,n,level,mode,p,coverage,mean_width,rel_lower,rel_upper\n";
  os << std::setprecision(10);
  for (std::size_t i = 0; i < r.p.size(); ++i)
    os << r.estimator << ',' << r.n << ',' << r.level << ',' << (r.mode == CoverageMode::exact ? "exact" : "mc")
       << ',' << r.p[i] << ',' << r.coverage[i] << ',' << r.mean_width[i] << ',' << r.rel_lower[i] << ','
       << r.rel_upper[i] << '\n';
}

}  // namespace ifr
