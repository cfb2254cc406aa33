// Serial reference against the OpenMP path for every parallel kernel.
// Arg 0 selects Exec::Serial, 1 selects Exec::Parallel.
#include <benchmark/benchmark.h>

#include "csgd/analysis.hpp"
#include "csgd/cluster.hpp"
#include "csgd/compressors.hpp"

using namespace csgd;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

HyperParams bench_hp(std::size_t d) {
  HyperParams hp;
  hp.d = d;
  hp.eps = 0.1;
  hp.L = 11.0;
  hp.rho = 12.0;
  hp.eta = 0.01;
  hp.r = 0.05;
  hp.I = 200.0;
  hp.R = 0.5;
  hp.mu = 0.2;
  return hp;
}

void BM_FactorEstimate(benchmark::State& state) {
  const auto spec = CompressorSpec::top_k(100, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        compression_factor_estimate(spec, isotropic_gaussian_sampler(), 20000, 1, exec_of(state)));
  }
}
BENCHMARK(BM_FactorEstimate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CompressorBias(benchmark::State& state) {
  const ParamVector x(100, 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compressor_bias(CompressorSpec::quantization(100, 1), x, 20000, 1, exec_of(state)));
  }
}
BENCHMARK(BM_CompressorBias)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SospFraction(benchmark::State& state) {
  const Objective obj = Objective::double_well(50).with_box(1.5);
  std::vector<Checkpoint> cps;
  for (std::uint64_t i = 0; i < 64; ++i) {
    cps.push_back({i, ParamVector(50, 0.01 * static_cast<double>(i % 7))});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(sosp_fraction(cps, obj, 0.1, 9.0, 5.75, exec_of(state)));
  }
}
BENCHMARK(BM_SospFraction)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DistributedRun(benchmark::State& state) {
  const std::size_t d = 200;
  std::vector<StochasticOracle> workers;
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back(Objective::double_well(d).with_box(1.5), NoiseKind::AdditiveGaussian, 0.1);
  }
  DistributedOptions opt;
  opt.run.iterations = 200;
  opt.exec = exec_of(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        distributed_run(workers, CompressorSpec::top_k(d, 20), bench_hp(d), ParamVector(d, 0.0), opt));
  }
}
BENCHMARK(BM_DistributedRun)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CouplingSeeds(benchmark::State& state) {
  const std::size_t d = 20;
  std::vector<double> diag(d, 1.0);
  diag[0] = -0.5;
  const SingleOracle oracle(StochasticOracle(Objective::quadratic(DenseMatrix::diagonal(diag)),
                                             NoiseKind::AdditiveGaussian, 0.1));
  HyperParams hp = bench_hp(d);
  hp.L = 1.0;
  hp.rho = 1.0;
  CouplingOptions opt;
  opt.seeds = 64;
  opt.horizon = 300;
  opt.exec = exec_of(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(coupling_experiment(oracle, CompressorSpec::random_k(d, 4), hp, ParamVector(d, 0.0), opt));
  }
}
BENCHMARK(BM_CouplingSeeds)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
