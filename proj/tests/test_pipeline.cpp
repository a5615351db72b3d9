#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "ifr/pipeline.hpp"
#include "oracles.hpp"

using namespace ifr;

namespace {

std::string temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("ifr_test_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Two small studies with tabulated death counts.
const char* kSmallConfig = R"({
  "seed": 7, "grid_points": 2048, "fixed_dts": [0, 7, 14],
  "datasets": [
    {"name": "A", "population": 12597, "tests": 919, "positives": 138,
     "test_period": ["2020-03-31", "2020-04-06"], "deaths": {"0": 7, "7": 7, "14": 8}, "fixed_delay": 1},
    {"name": "B", "population": 5528737, "tests": 388, "positives": 13,
     "test_period": ["2020-06-01", "2020-06-14"], "deaths": {"0": 323, "7": 325, "14": 327},
     "adaptive": {"dt": 10, "lo68": 9, "hi68": 11, "delta_gamma": 0.05}}
  ]})";

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("time series CSV: well-formed, gaps, malformed input") {
  std::istringstream ok("date,daily_cases,daily_deaths\n2020-03-01,1,0\n2020-03-02,3,1\n2020-03-03,5,2\n");
  const auto ts = parse_timeseries(ok);
  CHECK(ts.cases.size() == 3);
  CHECK(ts.deaths.daily[2] == 2.0);
  CHECK(format_date(ts.cases.start) == "2020-03-01");
  CHECK_FALSE(ts.tests.has_value());

  std::istringstream gap("date,daily_cases,daily_deaths\n2020-03-01,1,0\n2020-03-03,3,1\n");
  try {
    parse_timeseries(gap);
    FAIL("expected a gap error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("2020-03-02") != std::string::npos);
  }
  std::istringstream neg("date,daily_cases,daily_deaths\n2020-03-01,-1,0\n");
  CHECK_THROWS_AS(parse_timeseries(neg), ValidationError);
  std::istringstream bad_date("date,daily_cases,daily_deaths\n2020-02-30,1,0\n");
  CHECK_THROWS_AS(parse_timeseries(bad_date), ValidationError);
  std::istringstream dup("date,daily_cases,daily_deaths\n2020-03-01,1,0\n2020-03-01,1,0\n");
  CHECK_THROWS_AS(parse_timeseries(dup), ValidationError);
  std::istringstream header("day,cases,deaths\n2020-03-01,1,0\n");
  CHECK_THROWS_AS(parse_timeseries(header), ValidationError);
  std::istringstream with_tests("date,daily_cases,daily_deaths,daily_tests\n2020-03-01,1,0,10\n");
  CHECK(parse_timeseries(with_tests).tests->daily[0] == 10.0);
  CHECK_THROWS_AS(load_timeseries("/nonexistent/series.csv"), ValidationError);
}

TEST_CASE("moving average of cumulative deaths: prefix-sum and ramp oracles") {
  EpiSeries d;
  d.start = parse_date("2020-03-01");
  d.kind = SeriesKind::deaths;
  for (int i = 0; i < 60; ++i) d.daily.push_back(2.0 + 3.0 * i);  // linear ramp a + b i
  const TestPeriod per{parse_date("2020-03-10"), parse_date("2020-03-14")};
  for (int dt : {0, 3, 7, 21}) {
    // Prefix sums by hand.
    double s = 0.0;
    for (int t = 9 + dt; t <= 13 + dt; ++t) {
      double cum = 0.0;
      for (int i = 0; i <= t; ++i) cum += d.daily[i];
      s += cum;
    }
    CHECK(moving_avg_deaths_exact(d, per, dt) == doctest::Approx(s / 5.0).epsilon(1e-14));
    // Closed form: F(t) = (t + 1) a + b t (t + 1) / 2.
    double cf = 0.0;
    for (int t = 9 + dt; t <= 13 + dt; ++t) cf += (t + 1) * 2.0 + 3.0 * t * (t + 1) / 2.0;
    CHECK(moving_avg_deaths(d, per, dt) == std::llround(cf / 5.0));
  }
  // Deaths stop after the first week: every later window reads the same total.
  EpiSeries flat = d;
  for (std::size_t i = 7; i < flat.daily.size(); ++i) flat.daily[i] = 0.0;
  CHECK(moving_avg_deaths(flat, per, 0) == moving_avg_deaths(flat, per, 20));
  CHECK_THROWS_AS(moving_avg_deaths(d, per, 50), ValidationError);
  CHECK_THROWS_AS(moving_avg_deaths(d, TestPeriod{parse_date("2020-02-20"), parse_date("2020-03-02")}, 0),
                  ValidationError);
}

TEST_CASE("study configuration parsing and validation") {
  const auto cfg = parse_pipeline_config(kSmallConfig);
  REQUIRE(cfg.datasets.size() == 2);
  CHECK(cfg.datasets[0].fixed_delay == 1);
  CHECK(cfg.datasets[1].adaptive->delta_gamma == 0.05);
  CHECK(cfg.datasets[0].tc.v == 0.892);
  CHECK(cfg.datasets[0].period.days() == 7);
  CHECK(pipeline_columns(cfg) == std::vector<std::string>{"dt0", "dt7", "dt14", "adaptive"});

  CHECK_THROWS_AS(parse_pipeline_config("{"), ValidationError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"datasets": []})"), ValidationError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"datasets": [{"name": "X", "population": 100, "tests": 10,
      "positives": 11, "test_period": ["2020-01-01", "2020-01-02"]}]})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"datasets": [{"name": "X", "population": 100, "tests": 10,
      "positives": 1, "test_period": ["2020-01-05", "2020-01-02"]}]})"),
                  ValidationError);
  // Local test characteristics override the global ones.
  const auto local = parse_pipeline_config(R"({"datasets": [{"name": "X", "population": 100, "tests": 10,
      "positives": 1, "test_period": ["2020-01-01", "2020-01-02"],
      "test_characteristics": {"sensitivity": 0.95}}]})");
  CHECK(local.datasets[0].tc.v == 0.95);
  CHECK(local.datasets[0].tc.s == 0.994);
  CHECK(name_hash("GAN") == name_hash("GAN"));
  CHECK(name_hash("GAN") != name_hash("GVA"));
}

TEST_CASE("bundled study configuration loads") {
  const auto cfg = load_pipeline_config(std::string(IFR_SOURCE_DIR) + "/data/studies.json");
  CHECK(cfg.datasets.size() == 11);
  for (const auto& d : cfg.datasets) CHECK(d.fixed_deaths.size() == 4);
}

TEST_CASE("pipeline on a two-study configuration") {
  auto cfg = parse_pipeline_config(kSmallConfig);
  const auto res = run_pipeline(cfg);
  REQUIRE(res.datasets.size() == 2);
  const auto& a = res.datasets[0];
  const auto* a0 = a.column("dt0");
  REQUIRE(a0);
  CHECK(100 * a0->cr95.mean == doctest::Approx(0.40).epsilon(0.05));
  CHECK(std::abs(100 * a0->cr95.ci.lower - 0.16) < 0.02);
  CHECK(std::abs(100 * a0->cr95.ci.upper - 0.75) < 0.02);
  const auto* aa = a.column("adaptive");
  REQUIRE(aa);
  CHECK(aa->delay_source == "fixed_delay");
  CHECK(aa->dt == 1.0);
  CHECK(aa->n_f == 7.0);  // interpolated between the dt0 and dt7 entries
  CHECK(aa->delta_gamma == 0.0);

  // Death counts nearly flat across delays: the interval barely moves.
  const auto& b = res.datasets[1];
  for (const auto* key : {"dt0", "dt7", "dt14"}) {
    const auto* c = b.column(key);
    REQUIRE(c);
    CHECK(std::abs(100 * c->cr95.mean - 0.19) < 0.01);
    CHECK(std::abs(100 * c->cr95.ci.lower - 0.10) < 0.01);
    CHECK(std::abs(100 * c->cr95.ci.upper - 0.37) < 0.01);
    CHECK(c->delta_gamma == 0.0);
    CHECK(c->delta_lambda == doctest::Approx(b.delta_lambda));
  }
  const auto* ba = b.column("adaptive");
  REQUIRE(ba);
  CHECK(ba->delay_source == "configured");
  CHECK(ba->n_f == std::round(325 + 3.0 / 7.0 * 2.0));
  CHECK(ba->delta_gamma == 0.05);

  // Fused columns: every strategy present; the product is sharper than any
  // input in relative (log-scale) width.
  REQUIRE(res.fused.size() == 4);
  for (const auto& f : res.fused) {
    CHECK_FALSE(f.skipped.has_value());
    CHECK(f.rows.size() == 7);
    double min_width = INFINITY;
    for (const auto& d : res.datasets) {
      const auto* c = d.column(f.column);
      min_width = std::min(min_width, std::log(c->cr95.ci.upper / c->cr95.ci.lower));
    }
    for (const auto& r : f.rows)
      if (r.method == "PROD") CHECK(std::log(r.q95_hi / r.q95_lo) <= min_width);
  }
}

TEST_CASE("pipeline isolates failing datasets and is deterministic") {
  auto cfg = parse_pipeline_config(kSmallConfig);
  StudyDataset broken = cfg.datasets[1];
  broken.name = "BROKEN";
  broken.timeseries = "/nonexistent/series.csv";
  cfg.datasets.push_back(broken);
  StudyDataset partial = cfg.datasets[1];
  partial.name = "PARTIAL";
  partial.fixed_deaths.erase(0);
  partial.adaptive.reset();
  cfg.datasets.push_back(partial);

  cfg.exec = Exec::parallel;
  const auto r1 = run_pipeline(cfg);
  cfg.exec = Exec::serial;
  const auto r2 = run_pipeline(cfg);
  CHECK(r1.datasets[2].columns.empty());
  CHECK(r1.datasets[2].skipped.size() == 4);
  // dt0 has no entry and lies below the table; adaptive has no source.
  CHECK(r1.datasets[3].column("dt0") == nullptr);
  CHECK(r1.datasets[3].column("dt7") != nullptr);
  CHECK(r1.datasets[3].column("adaptive") == nullptr);
  CHECK(r1.fused[0].datasets.size() == 2);

  const auto d1 = temp_dir("det1"), d2 = temp_dir("det2");
  write_pipeline_outputs(d1, cfg, r1);
  write_pipeline_outputs(d2, cfg, r2);
  for (const auto* f : {"counts.csv", "datasets.csv", "fused.csv", "delays.csv", "skipped.csv",
                        "density_A_dt0.csv"})
    CHECK(slurp(d1 + "/" + f) == slurp(d2 + "/" + f));
  CHECK(slurp(d1 + "/skipped.csv").find("BROKEN") != std::string::npos);
}

TEST_CASE("adaptive delay from a synthetic series through deconvolution") {
  // Infections: a Gaussian wave; cases and deaths follow through the kernels.
  const auto ks = load_kernel_config(std::string(IFR_SOURCE_DIR) + "/data/kernels.json");
  const auto kk = combine_kernels(ks);
  EpiSeries x;
  x.start = parse_date("2020-02-01");
  x.kind = SeriesKind::infections;
  for (int t = 0; t < 140; ++t) x.daily.push_back(2000.0 * std::exp(-0.5 * std::pow((t - 50.0) / 12.0, 2)));
  const auto cases = convolve_series(kk.k_c, x);
  const auto deaths = convolve_series(kk.k_f, x);
  const auto dir = temp_dir("synthetic");
  {
    std::ofstream f(dir + "/series.csv");
    f << "date,daily_cases,daily_deaths\n";
    for (std::size_t i = 0; i < 140; ++i)
      f << format_date(x.date_at(i)) << ',' << std::round(cases.daily[i]) << ',' << std::round(0.005 * deaths.daily[i])
        << '\n';
  }
  {
    std::ofstream f(dir + "/kernels.json");
    f << slurp(std::string(IFR_SOURCE_DIR) + "/data/kernels.json");
  }
  std::ofstream(dir + "/config.json") << R"({"seed": 3, "grid_points": 1024, "fixed_dts": [0, 7],
    "kernels": "kernels.json", "uncertainty": {"n_mc": 100},
    "datasets": [{"name": "SYN", "population": 1000000, "tests": 2000, "positives": 120,
      "test_period": ["2020-04-10", "2020-04-12"], "timeseries": "series.csv"}]})";
  const auto cfg = load_pipeline_config(dir + "/config.json");
  const auto res = run_pipeline(cfg);
  const auto& d = res.datasets[0];
  const auto* ad = d.column("adaptive");
  REQUIRE_MESSAGE(ad, (d.skipped.empty() ? std::string() : d.skipped[0].second));
  CHECK(ad->delay_source == "deconvolution");
  CHECK(ad->dt >= 0.0);
  CHECK(ad->dt_lo68 <= ad->dt);
  CHECK(ad->dt_hi68 >= ad->dt);
  CHECK(ad->delta_gamma >= 0.0);
  // Fixed columns read the series directly.
  const TestPeriod per{parse_date("2020-04-10"), parse_date("2020-04-12")};
  const auto ts = load_timeseries(dir + "/series.csv");
  CHECK(d.column("dt7")->n_f == static_cast<double>(moving_avg_deaths(ts.deaths, per, 7)));
  CHECK(d.column("dt7")->delay_source == "series");
}

TEST_CASE("infected count from an IFR interval") {
  const auto w = wilson_interval(CountPair(7, 1892), 0.95);
  IntervalEstimate ifr = w;
  ifr.point = 0.0037;
  const auto e = infected_from_ifr(ifr, 6575);
  CHECK(e.lower == doctest::Approx(6575 / w.upper));
  CHECK(e.upper == doctest::Approx(6575 / w.lower));
  CHECK(std::abs(e.point / 1e6 - 1.777) < 1e-3);
  CHECK_FALSE(e.upper_unbounded);

  IntervalEstimate all{1.0, 1.0, 0.95, 1.0, "x"};
  CHECK(infected_from_ifr(all, 500).point == 500.0);
  IntervalEstimate zero{0.0, 0.01, 0.95, 0.005, "x"};
  const auto z = infected_from_ifr(zero, 100);
  CHECK(z.upper_unbounded);
  CHECK(std::isinf(z.upper));
  IntervalEstimate bad{0.0, 0.0, 0.95, 0.0, "x"};
  CHECK_THROWS_AS(infected_from_ifr(bad, 100), ValidationError);
}

TEST_CASE("exact coverage: conservative, undercovering and oracle values") {
  CoverageConfig cp;
  cp.method = BinomialMethod::clopper_pearson;
  cp.n = 100;
  const auto rc = coverage_simulation(cp);
  CHECK(rc.p.size() == 999);
  for (double c : rc.coverage) REQUIRE(c >= 0.95 - 1e-12);

  CoverageConfig wald;
  wald.method = BinomialMethod::wald;
  wald.n = 100;
  const auto rw = coverage_simulation(wald);
  double worst = 1.0;
  for (std::size_t i = 0; i < rw.p.size(); ++i)
    if (rw.p[i] < 0.05) worst = std::min(worst, rw.coverage[i]);
  CHECK(worst < 0.90);

  // Oracle at p = 0.5: sum the pmf over k whose Wald interval holds 0.5.
  wald.p_grid = {0.5};
  const auto half = coverage_simulation(wald);
  double oracle_cov = 0.0;
  const double z = 1.959963984540054;
  for (int k = 0; k <= 100; ++k) {
    const double ph = k / 100.0, h = z * std::sqrt(ph * (1 - ph) / 100.0);
    if (ph - h <= 0.5 && 0.5 <= ph + h) oracle_cov += oracle::pmf(k, 100, 0.5);
  }
  CHECK(half.coverage[0] == doctest::Approx(oracle_cov).epsilon(1e-12));

  // No Monte Carlo noise: repeated runs agree exactly.
  CHECK(coverage_simulation(wald).coverage == half.coverage);
}

TEST_CASE("MC coverage agrees with exact enumeration and is reproducible") {
  CoverageConfig c;
  c.method = BinomialMethod::wilson;
  c.n = 50;
  c.p_grid = {0.02, 0.1, 0.3, 0.5};
  const auto exact = coverage_simulation(c);
  c.mode = CoverageMode::mc;
  c.mc_samples = 20000;
  c.seed = 99;
  c.exec = Exec::serial;
  const auto mc = coverage_simulation(c);
  c.exec = Exec::parallel;
  const auto mc2 = coverage_simulation(c);
  CHECK(mc.coverage == mc2.coverage);
  for (std::size_t i = 0; i < c.p_grid.size(); ++i) {
    const double se = std::sqrt(exact.coverage[i] * (1 - exact.coverage[i]) / 20000.0);
    CHECK(std::abs(mc.coverage[i] - exact.coverage[i]) < 5 * se + 1e-12);
    CHECK(std::abs(mc.mean_width[i] - exact.mean_width[i]) < 0.05 * exact.mean_width[i]);
  }
  CHECK_THROWS_AS(parse_coverage_mode("fast"), ValidationError);
  c.p_grid = {1.0};
  CHECK_THROWS_AS(coverage_simulation(c), ValidationError);
}

TEST_CASE("command line: outputs and exit codes") {
  auto r = cli({"interval", "--method", "wilson", "--k", "7", "--n", "1892", "--level", "0.95"});
  CHECK(r.code == 0);
  CHECK(r.out.find("[0.18%, 0.76%]") != std::string::npos);

  r = cli({"--out", "csv", "ratio", "--method", "katz", "--k1", "7", "--n1", "12597", "--k2", "138", "--n2", "919"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("method,level,lower,upper", 0) == 0);

  r = cli({"interval", "--k", "7", "--n", "1892", "--bogus"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(cli({}).code == 2);
  CHECK(cli({"interval", "--k", "9", "--n", "5"}).code == 2);
  CHECK(cli({"--level", "1.5", "interval", "--k", "1", "--n", "5"}).code == 2);
  CHECK(cli({"--help"}).code == 0);

  r = cli({"coverage", "--estimator", "wald", "--n", "100", "--mode", "exact", "--step", "0.01"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("estimator,n,level,mode,p,coverage", 0) == 0);

  const auto dir = temp_dir("cli");
  r = cli({"posterior", "--k1", "7", "--n1", "12597", "--k2", "138", "--n2", "919", "--density", dir + "/a.csv"});
  CHECK(r.code == 0);
  CHECK(r.out.find("posterior mode") != std::string::npos);
  r = cli({"posterior", "--k1", "300", "--n1", "12597", "--k2", "138", "--n2", "919", "--density", dir + "/b.csv"});
  CHECK(r.code == 0);
  r = cli({"--out", "json", "combine", "--strategy", "sum", dir + "/a.csv", dir + "/b.csv"});
  CHECK(r.code == 0);
  CHECK(r.out.find("\"method\": \"SUM\"") != std::string::npos);
  // Incompatible densities: the product underflows, a numeric failure.
  r = cli({"combine", "--strategy", "prod", dir + "/a.csv", dir + "/b.csv"});
  CHECK(r.code == 3);
  CHECK(r.err.find("incompatible") != std::string::npos);
}
