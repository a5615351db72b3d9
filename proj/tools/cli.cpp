#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "ifr/bayes.hpp"
#include "ifr/bernoulli_sim.hpp"
#include "ifr/fusion.hpp"
#include "ifr/interval.hpp"
#include "ifr/pipeline.hpp"
#include "ifr/ratio.hpp"
#include "ifr/timeflow.hpp"

namespace ifr {

namespace {

using nlohmann::json;

enum class OutFormat { text, csv, json };

// Rows of named values printed as text, CSV or a JSON array of objects.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;

  void emit(std::ostream& os, OutFormat f) const {
    if (f == OutFormat::json) {
      json arr = json::array();
      for (const auto& r : rows) {
        json o;
        for (std::size_t i = 0; i < columns.size(); ++i) o[columns[i]] = r[i];
        arr.push_back(o);
      }
      os << arr.dump(2) << '\n';
      return;
    }
    auto cell = [](const json& v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_float()) {
        std::ostringstream s;
        s << std::setprecision(10) << v.get<double>();
        return s.str();
      }
      return v.dump();
    };
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell(r[i]);
      os << '\n';
    }
  }
};

std::string pct(double x) {
  std::ostringstream s;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  s << std::fixed << std::setprecision(2) << 100.0 * x << '%';
  return s.str();
}

std::string level_tag(double level) {
  std::ostringstream s;
  s << "CI" << std::llround(100.0 * level);
  return s.str();
}

struct Globals {
  std::uint64_t seed = 0;
  double level = 0.95;
  std::string out = "text";
  std::string config;
  bool serial = false;

  OutFormat format() const {
    if (out == "csv") return OutFormat::csv;
    if (out == "json") return OutFormat::json;
    return OutFormat::text;
  }
  Exec exec() const { return serial ? Exec::serial : Exec::parallel; }
};

void print_interval(std::ostream& os, const Globals& g, const IntervalEstimate& ci) {
  if (g.format() == OutFormat::text) {
    os << ci.method << ' ' << level_tag(ci.level) << ": [" << pct(ci.lower) << ", " << pct(ci.upper) << "]"
       << " point " << pct(ci.point);
    if (!ci.physical) os << " (outside [0, 1])";
    if (!ci.contiguous) os << " (non-contiguous)";
    os << '\n';
    return;
  }
  Table t{{"method", "level", "lower", "upper", "point", "physical", "contiguous"}, {}};
  t.rows.push_back({ci.method, ci.level, ci.lower, ci.upper, ci.point, ci.physical, ci.contiguous});
  t.emit(os, g.format());
}

void print_rows(std::ostream& os, const Globals& g, const std::vector<SummaryRow>& rows) {
  if (g.format() == OutFormat::text) {
    for (const auto& r : rows)
      os << std::left << std::setw(10) << r.method << " mode " << pct(r.mode) << "  mean " << pct(r.mean) << "  Q68 ["
         << pct(r.q68_lo) << ", " << pct(r.q68_hi) << "]  Q95 [" << pct(r.q95_lo) << ", " << pct(r.q95_hi) << "]\n";
    return;
  }
  Table t{{"method", "mode", "mean", "q68_lo", "q68_hi", "q95_lo", "q95_hi", "interval"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({r.method, r.mode, r.mean, r.q68_lo, r.q68_hi, r.q95_lo, r.q95_hi, r.interval_kind});
  t.emit(os, g.format());
}

void warn_all(std::ostream& err, const std::vector<std::string>& w) {
  for (const auto& s : w) err << "warning: " << s << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path);
  return f;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Infection fatality rate estimation toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--level", g.level, "Confidence / credible level")->capture_default_str();
  app.add_option("--out", g.out, "Output format")->check(CLI::IsMember({"text", "csv", "json"}))->capture_default_str();
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_flag("--serial", g.serial, "Run kernels on the serial reference path");

  // interval
  auto* interval = app.add_subcommand("interval", "Single binomial proportion interval")->fallthrough();
  std::string i_method = "wilson";
  std::int64_t i_k = 0, i_n = 0, i_mc = 100000, i_grid = 2000;
  double i_pmin = 0.0, i_pmax = 1.0;
  interval->add_option("--method", i_method, "wald|wilson|clopper-pearson|midp|llr|llr-mc|belt-cp")->capture_default_str();
  interval->add_option("--k", i_k, "Successes")->required();
  interval->add_option("--n", i_n, "Trials")->required();
  interval->add_option("--mc-samples", i_mc, "Belt samples per grid point (llr-mc)")->capture_default_str();
  interval->add_option("--grid", i_grid, "Belt grid points")->capture_default_str();
  interval->add_option("--p-min", i_pmin, "Belt parameter range lower end")->capture_default_str();
  interval->add_option("--p-max", i_pmax, "Belt parameter range upper end")->capture_default_str();

  // ratio
  auto* ratio = app.add_subcommand("ratio", "Ratio of two binomial proportions")->fallthrough();
  std::string r_method = "profile";
  double r_k1 = 0, r_n1 = 1, r_k2 = 0, r_n2 = 1;
  std::int64_t r_boot = 1000000;
  bool r_cc = false;
  ratio->add_option("--method", r_method,
                    "katz|asinh|cond-cp|cond-midp|profile|bootstrap-prc|bootstrap-bc|bootstrap-bca, or a single "
                    "binomial method on the reduced counts")
      ->capture_default_str();
  ratio->add_option("--k1", r_k1, "Deaths")->required();
  ratio->add_option("--n1", r_n1, "Population")->required();
  ratio->add_option("--k2", r_k2, "Positive tests")->required();
  ratio->add_option("--n2", r_n2, "Tests")->required();
  ratio->add_option("--replicates", r_boot, "Bootstrap replicates")->capture_default_str();
  ratio->add_flag("--continuity", r_cc, "Continuity correction for zero cells (katz, asinh)");

  // posterior
  auto* posterior = app.add_subcommand("posterior", "Bayesian ratio posterior density")->fallthrough();
  double p_k1 = 0, p_n1 = 1, p_k2 = 0, p_n2 = 1, p_dg = 0, p_dl = 0;
  std::string p_prior = "jeffreys", p_density;
  std::size_t p_points = 4096;
  posterior->add_option("--k1", p_k1)->required();
  posterior->add_option("--n1", p_n1)->required();
  posterior->add_option("--k2", p_k2)->required();
  posterior->add_option("--n2", p_n2)->required();
  posterior->add_option("--prior", p_prior, "jeffreys|flat|haldane")->capture_default_str();
  posterior->add_option("--delta-gamma", p_dg, "Relative scale uncertainty on k1")->capture_default_str();
  posterior->add_option("--delta-lambda", p_dl, "Relative scale uncertainty on k2")->capture_default_str();
  posterior->add_option("--points", p_points, "Grid points")->capture_default_str();
  posterior->add_option("--density", p_density, "Write the density CSV here");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Correlated Bernoulli population simulation")->fallthrough();
  PopulationSimConfig s_cfg;
  std::string s_counts;
  simulate->add_option("--population", s_cfg.n_p)->capture_default_str();
  simulate->add_option("--tested", s_cfg.n_t)->capture_default_str();
  simulate->add_option("--mean-t", s_cfg.mean_t)->capture_default_str();
  simulate->add_option("--mean-i", s_cfg.mean_i)->capture_default_str();
  simulate->add_option("--mean-f", s_cfg.mean_f)->capture_default_str();
  simulate->add_option("--rho", s_cfg.rho_if, "I-F correlation; < 0 uses the maximum coupling")->capture_default_str();
  simulate->add_option("--n-mc", s_cfg.n_mc)->capture_default_str();
  simulate->add_flag("--fluctuate-tests", s_cfg.fluctuate_test_count, "Draw the tested count binomially");
  simulate->add_option("--counts", s_counts, "Write per-population category counts here");

  // deconv
  auto* deconv = app.add_subcommand("deconv", "Deconvolve a case series and read out the delay")->fallthrough();
  std::string d_series, d_kernels = "data/kernels.json", d_column = "cases", d_start, d_end;
  std::optional<double> d_lambda;
  int d_nmc = 200;
  deconv->add_option("--series", d_series, "Time series CSV")->required();
  deconv->add_option("--kernels", d_kernels, "Kernel JSON")->capture_default_str();
  deconv->add_option("--column", d_column, "cases|deaths")->capture_default_str();
  deconv->add_option("--lambda", d_lambda, "Regularization strength (default: selected)");
  deconv->add_option("--window-start", d_start, "Read-out window start (date); with --window-end estimates the delay");
  deconv->add_option("--window-end", d_end, "Read-out window end (date)");
  deconv->add_option("--n-mc", d_nmc, "Replicates for the delay uncertainty")->capture_default_str();

  // combine
  auto* combine = app.add_subcommand("combine", "Combine posterior densities")->fallthrough();
  std::string c_strategy = "all", c_se = "cr68", c_fused;
  std::vector<std::string> c_files;
  std::vector<double> c_weights;
  combine->add_option("--strategy", c_strategy, "mom|nl|ot|ot-invvar|sum|prod|all")->capture_default_str();
  combine->add_option("--weights", c_weights, "One weight per density");
  combine->add_option("--se", c_se, "cr68|sd reduction for mom/nl")->capture_default_str();
  combine->add_option("--fused", c_fused, "Write the fused density CSV here (single density strategy)");
  combine->add_option("files", c_files, "Density CSV files")->required()->check(CLI::ExistingFile);

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Full multi-study run from a study configuration")->fallthrough();
  std::string pl_dir = "pipeline_out";
  bool pl_nodens = false;
  pipeline->add_option("--outdir", pl_dir, "Output directory")->capture_default_str();
  pipeline->add_flag("--no-densities", pl_nodens, "Skip per-dataset density files");

  // coverage
  auto* coverage = app.add_subcommand("coverage", "Coverage of single binomial intervals")->fallthrough();
  std::string v_est = "wald", v_mode = "exact";
  std::int64_t v_n = 100, v_mc = 100000;
  double v_step = 0.001;
  coverage->add_option("--estimator", v_est, "wald|wilson|clopper-pearson|midp|llr")->capture_default_str();
  coverage->add_option("--n", v_n)->capture_default_str();
  coverage->add_option("--mode", v_mode, "exact|mc")->capture_default_str();
  coverage->add_option("--step", v_step, "p grid step")->capture_default_str();
  coverage->add_option("--mc-samples", v_mc)->capture_default_str();

  std::vector<std::string> argv_store{"ifr"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 2;
  }

  try {
    check_level(g.level);
    if (*interval) {
      const CountPair c(i_k, i_n);
      IntervalEstimate ci;
      if (i_method == "llr-mc" || i_method == "belt-cp") {
        BeltConfig b;
        b.n = i_n;
        b.level = g.level;
        b.ordering = i_method == "llr-mc" ? BeltOrdering::llr_exact : BeltOrdering::central_pdf;
        b.grid_size = i_grid;
        b.mc_samples = i_mc;
        b.seed = g.seed;
        b.param_min = i_pmin;
        b.param_max = i_pmax;
        ci = invert_belt(build_neyman_belt(b, g.exec()), i_k);
      } else {
        ci = binomial_interval(parse_binomial_method(i_method), c, g.level);
      }
      print_interval(out, g, ci);
    } else if (*ratio) {
      const RatioCounts c(r_k1, r_n1, r_k2, r_n2);
      IntervalEstimate ci;
      if (r_method == "katz") ci = katz_log_interval(c, g.level, {r_cc});
      else if (r_method == "asinh") ci = asinh_ratio_interval(c, g.level, {r_cc});
      else if (r_method == "cond-cp") ci = conditional_ratio_interval(c, g.level, ConditionalBase::cp);
      else if (r_method == "cond-midp") ci = conditional_ratio_interval(c, g.level, ConditionalBase::midp);
      else if (r_method == "profile") ci = profile_llr_interval(c, g.level);
      else if (r_method.rfind("bootstrap-", 0) == 0) {
        BootstrapConfig b;
        b.replicates = r_boot;
        b.variant = parse_bootstrap_variant(r_method.substr(10));
        b.seed = g.seed;
        const auto bi = bootstrap_ratio_interval(c, g.level, b, g.exec());
        if (bi.discarded > 0) err << "warning: " << bi.discarded << " resamples with k2* = 0 discarded\n";
        ci = bi.ci;
      } else {
        const auto red = single_binomial_reduction(c);
        ci = binomial_interval(parse_binomial_method(r_method), red, g.level);
        ci.method += " (reduced " + std::to_string(red.k) + "/" + std::to_string(red.n) + ")";
      }
      print_interval(out, g, ci);
    } else if (*posterior) {
      const RatioCounts c(p_k1, p_n1, p_k2, p_n2);
      const auto prior = parse_beta_prior(p_prior);
      GridSpec spec;
      spec.points = p_points;
      Diagnostics diag;
      const auto d = dressed_ratio_posterior(c, prior, prior, {1.0, p_dg, ScaleFamily::normal},
                                             {1.0, p_dl, ScaleFamily::normal}, spec, &diag, g.exec());
      warn_all(err, diag.warnings);
      const auto ci = credible_interval(d, g.level);
      if (g.format() == OutFormat::text) {
        out << "posterior mode " << pct(ci.mode) << " mean " << pct(ci.mean) << " median " << pct(ci.median) << " CR"
            << std::llround(100 * g.level) << " [" << pct(ci.ci.lower) << ", " << pct(ci.ci.upper) << "]\n";
      } else {
        Table t{{"mode", "mean", "median", "level", "lower", "upper"}, {}};
        t.rows.push_back({ci.mode, ci.mean, ci.median, g.level, ci.ci.lower, ci.ci.upper});
        t.emit(out, g.format());
      }
      if (!p_density.empty()) {
        auto f = open_out(p_density);
        write_density_csv(f, d);
      }
    } else if (*simulate) {
      s_cfg.seed = g.seed;
      const auto st = run_population_sim(s_cfg, g.exec());
      Table t{{"category", "mean", "q68_lo", "q68_hi", "q95_lo", "q95_hi"}, {}};
      for (int c = 0; c < kCategories; ++c) {
        const std::string tag{char('0' + (c >> 2)), char('0' + ((c >> 1) & 1)), char('0' + (c & 1))};
        t.rows.push_back({tag, st.mean[c], st.q68[c].lo, st.q68[c].hi, st.q95[c].lo, st.q95[c].hi});
      }
      t.emit(out, g.format() == OutFormat::json ? OutFormat::json : OutFormat::csv);
      if (!s_counts.empty()) {
        auto f = open_out(s_counts);
        write_category_csv(f, st);
      }
    } else if (*deconv) {
      const auto ts = load_timeseries(d_series);
      if (d_column != "cases" && d_column != "deaths") throw ValidationError("--column must be cases or deaths");
      const auto ks = load_kernel_config(d_kernels);
      Diagnostics diag;
      const auto kk = combine_kernels(ks, &diag);
      warn_all(err, diag.warnings);
      const bool cases = d_column == "cases";
      DeconvConfig dc;
      dc.lambda_r = d_lambda;
      dc.seed = g.seed;
      if (!d_start.empty() || !d_end.empty()) {
        if (d_start.empty() || d_end.empty()) throw ValidationError("--window-start and --window-end go together");
        if (!cases) throw ValidationError("delay read-out deconvolves the case series");
        UncertaintyConfig u;
        u.n_mc = d_nmc;
        u.seed = g.seed;
        u.exec = g.exec();
        const int t0 = static_cast<int>(ts.cases.offset_of(parse_date(d_start)));
        const int t1 = static_cast<int>(ts.cases.offset_of(parse_date(d_end)));
        const auto du = propagate_delay_uncertainty(ts.cases, ts.deaths, t0, t1, ks, dc, u);
        Table t{{"dt", "dt_lo68", "dt_hi68", "deaths", "delta_gamma", "lambda", "replicates", "failed"}, {}};
        t.rows.push_back({du.delay.dt, du.delay.lo68, du.delay.hi68, du.deaths_central, du.delta_gamma, du.lambda_r,
                          du.used, du.failed});
        t.emit(out, g.format() == OutFormat::json ? OutFormat::json : OutFormat::csv);
      } else {
        const auto& y = cases ? ts.cases : ts.deaths;
        const auto res = deconvolve(y, cases ? kk.k_c : kk.k_f, dc);
        err << "lambda " << res.lambda_r << ", residual " << res.residual_norm << ", pad " << res.pad_days << " days\n";
        Table t{{"date", "infections"}, {}};
        for (std::size_t i = 0; i < res.x.size(); ++i) t.rows.push_back({format_date(res.x.date_at(i)), res.x.daily[i]});
        t.emit(out, g.format() == OutFormat::json ? OutFormat::json : OutFormat::csv);
      }
    } else if (*combine) {
      std::vector<GridDensity> ds;
      std::vector<StudyEstimate> est;
      for (const auto& path : c_files) {
        std::ifstream f(path);
        ds.push_back(read_density_csv(f));
        est.push_back(estimate_from_density(path, ds.back(), parse_se_reduction(c_se)));
      }
      if (!c_weights.empty())
        for (std::size_t i = 0; i < est.size() && i < c_weights.size(); ++i) est[i].w = c_weights[i];
      Diagnostics diag;
      std::vector<SummaryRow> rows;
      std::optional<FusedDensity> last;
      auto want = [&](const char* s) { return c_strategy == "all" || c_strategy == s; };
      if (c_strategy != "all" && !(c_strategy == "mom" || c_strategy == "nl" || c_strategy == "ot" ||
                                   c_strategy == "ot-invvar" || c_strategy == "sum" || c_strategy == "prod"))
        throw ValidationError("unknown strategy " + c_strategy);
      if (want("mom")) rows.push_back(summarize(mom_combine(est, &diag)));
      if (want("nl")) rows.push_back(summarize(nl_fit(est, &diag)));
      if (want("ot")) rows.push_back(summarize(*(last = ot_barycenter(ds, c_weights))));
      if (want("ot-invvar")) {
        std::vector<double> w;
        for (const auto& e : est) w.push_back(1.0 / (e.s * e.s));
        last = ot_barycenter(ds, w);
        last->method = "OT-invvar";
        rows.push_back(summarize(*last));
      }
      if (want("sum")) rows.push_back(summarize(*(last = mean_of_posteriors(ds, c_weights))));
      if (want("prod")) rows.push_back(summarize(*(last = product_of_posteriors(ds, c_weights))));
      warn_all(err, diag.warnings);
      print_rows(out, g, rows);
      if (!c_fused.empty()) {
        if (c_strategy == "all" || !last) throw ValidationError("--fused needs a single density strategy");
        auto f = open_out(c_fused);
        write_density_csv(f, last->density);
      }
    } else if (*pipeline) {
      if (g.config.empty()) throw ValidationError("pipeline needs --config");
      auto cfg = load_pipeline_config(g.config);
      if (app.get_option("--seed")->count() > 0) cfg.seed = g.seed;
      cfg.exec = g.exec();
      const auto res = run_pipeline(cfg);
      write_pipeline_outputs(pl_dir, cfg, res, !pl_nodens);
      for (const auto& d : res.datasets)
        for (const auto& [col, why] : d.skipped) err << "skipped " << d.name << " " << col << ": " << why << '\n';
      if (g.format() == OutFormat::text) {
        for (const auto& f : res.fused) {
          out << "== " << f.column << " (" << f.datasets.size() << " datasets)\n";
          print_rows(out, g, f.rows);
          warn_all(err, f.warnings);
        }
      } else if (g.format() == OutFormat::csv) {
        write_fused_csv(out, res);
      } else {
        json j = json::array();
        for (const auto& f : res.fused)
          for (const auto& r : f.rows)
            j.push_back({{"column", f.column}, {"method", r.method}, {"mode", r.mode}, {"mean", r.mean},
                         {"q68", {r.q68_lo, r.q68_hi}}, {"q95", {r.q95_lo, r.q95_hi}}, {"interval", r.interval_kind}});
        out << j.dump(2) << '\n';
      }
      err << "outputs written to " << pl_dir << '\n';
    } else if (*coverage) {
      CoverageConfig cc;
      cc.method = parse_binomial_method(v_est);
      cc.n = v_n;
      cc.level = g.level;
      cc.mode = parse_coverage_mode(v_mode);
      cc.p_grid = default_p_grid(v_step);
      cc.mc_samples = v_mc;
      cc.seed = g.seed;
      cc.exec = g.exec();
      const auto rep = coverage_simulation(cc);
      if (g.format() == OutFormat::json) {
        json j{{"estimator", rep.estimator}, {"n", rep.n},           {"level", rep.level},
               {"p", rep.p},                 {"coverage", rep.coverage}, {"mean_width", rep.mean_width},
               {"rel_lower", rep.rel_lower}, {"rel_upper", rep.rel_upper}};
        out << j.dump(2) << '\n';
      } else {
        write_coverage_csv(out, rep);
      }
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace ifr
