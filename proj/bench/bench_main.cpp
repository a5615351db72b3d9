// Serial vs OpenMP timings for the Monte Carlo and quadrature kernels.
// Argument 0 selects Exec::serial, 1 selects Exec::parallel.
#include <benchmark/benchmark.h>

#include <cmath>

#include "ifr/bayes.hpp"
#include "ifr/bernoulli_sim.hpp"
#include "ifr/fusion.hpp"
#include "ifr/interval.hpp"
#include "ifr/pipeline.hpp"
#include "ifr/ratio.hpp"
#include "ifr/timeflow.hpp"

namespace {

using namespace ifr;

const RatioCounts kGangelt{7, 12597, 138, 919};

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

void BM_NeymanBelt(benchmark::State& st) {
  BeltConfig cfg;
  cfg.n = 1892;
  cfg.param_max = 0.02;
  cfg.seed = 1;
  for (auto _ : st) benchmark::DoNotOptimize(build_neyman_belt(cfg, exec_of(st)));
}

void BM_Bootstrap(benchmark::State& st) {
  BootstrapConfig cfg;
  cfg.replicates = 1000000;
  cfg.variant = BootstrapVariant::bca;
  cfg.seed = 1;
  for (auto _ : st) benchmark::DoNotOptimize(bootstrap_ratio_interval(kGangelt, 0.95, cfg, exec_of(st)));
}

void BM_RatioPosterior(benchmark::State& st) {
  const auto jeff = parse_beta_prior("jeffreys");
  for (auto _ : st)
    benchmark::DoNotOptimize(dressed_ratio_posterior(kGangelt, jeff, jeff, {1.0, 0.1}, {1.0, 0.043}, {}, nullptr,
                                                     exec_of(st)));
}

void BM_PopulationSim(benchmark::State& st) {
  PopulationSimConfig cfg;
  cfg.n_mc = 20000;
  cfg.seed = 1;
  for (auto _ : st) benchmark::DoNotOptimize(run_population_sim(cfg, exec_of(st)));
}

void BM_JointLlr(benchmark::State& st) {
  const std::vector<RatioCounts> data{kGangelt, {9, 3000, 55, 900}, {40, 20000, 300, 2400}};
  for (auto _ : st) benchmark::DoNotOptimize(joint_llr_combine(data, 0.95, exec_of(st)));
}

void BM_DelayUncertainty(benchmark::State& st) {
  const auto ks = load_kernel_config(IFR_SOURCE_DIR "/data/kernels.json");
  const auto kernels = combine_kernels(ks);
  EpiSeries x;
  x.start = parse_date("2020-02-01");
  x.kind = SeriesKind::infections;
  const int n = 120;
  for (int t = 0; t < n; ++t) {
    const double u = t / 20.0;
    x.daily.push_back(t < 3 ? 0.0 : 2e4 * u * u * u * std::exp(-1.5 * u));
  }
  auto cases = convolve_series(kernels.k_c, x);
  auto deaths = convolve_series(kernels.k_f, x);
  cases.daily.resize(n);
  deaths.daily.resize(n);
  for (auto& v : deaths.daily) v *= 0.005;
  DeconvConfig dc;
  dc.lambda_r = 0.05;
  UncertaintyConfig cfg;
  cfg.n_mc = 100;
  cfg.dt_max = 30;
  cfg.seed = 1;
  cfg.exec = exec_of(st);
  for (auto _ : st) benchmark::DoNotOptimize(propagate_delay_uncertainty(cases, deaths, 60, 66, ks, dc, cfg));
}

void BM_Coverage(benchmark::State& st) {
  CoverageConfig cfg;
  cfg.method = BinomialMethod::clopper_pearson;
  cfg.n = 1000;
  cfg.mode = CoverageMode::mc;
  cfg.mc_samples = 20000;
  cfg.p_grid = default_p_grid(0.01);
  cfg.exec = exec_of(st);
  for (auto _ : st) benchmark::DoNotOptimize(coverage_simulation(cfg));
}

}  // namespace

BENCHMARK(BM_NeymanBelt)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bootstrap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RatioPosterior)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PopulationSim)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_JointLlr)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DelayUncertainty)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Coverage)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
