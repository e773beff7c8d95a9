// Serial reference vs OpenMP paths: gram assembly, fitted-band sweep, chains.

#include "biascal/calibration.hpp"
#include "biascal/config.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

using namespace biascal;

namespace {

Points random_points(Eigen::Index n, Eigen::Index dim) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Points p(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < dim; ++k) p(i, k) = u(rng);
  return p;
}

const Kernel& bench_kernel() {
  static const Kernel k = Kernel::constant(2.0) * Kernel::matern32(1.0, 0.2) + Kernel::rbf(0.5, 0.1);
  return k;
}

void BM_GramSerial(benchmark::State& state) {
  const Points x = random_points(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(serial::gram(bench_kernel(), x));
}

void BM_GramParallel(benchmark::State& state) {
  const Points x = random_points(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(gram(bench_kernel(), x));
}

// Beam no-bias posterior, swept over a fine grid.
struct BandFixture {
  PreparedRun run;
  CalibrationResult result;
  Points grid;

  BandFixture() {
    auto c = benchmark_config("beam", Method::nobias, 0);
    c["mcmc"]["steps"] = 2000;
    c["mcmc"]["burn_in"] = 200;
    run = prepare_run(c, ".");
    result = calibrate(run.calibration, *run.model, run.data);
    result.config.band_samples = 4000;
    grid.resize(2001, 1);
    for (Eigen::Index i = 0; i < grid.rows(); ++i) grid(i, 0) = 0.025 * static_cast<double>(i);
  }
  static BandFixture& get() {
    static BandFixture f;
    return f;
  }
};

void BM_BandSerial(benchmark::State& state) {
  auto& f = BandFixture::get();
  for (auto _ : state) benchmark::DoNotOptimize(serial::fitted_response(f.result, *f.run.model, f.run.data, f.grid));
}

void BM_BandParallel(benchmark::State& state) {
  auto& f = BandFixture::get();
  for (auto _ : state) benchmark::DoNotOptimize(fitted_response(f.result, *f.run.model, f.run.data, f.grid));
}

// Pedagogical KOH chains, one thread vs one thread per chain.
void BM_Chains(benchmark::State& state) {
  const int threads = static_cast<int>(state.range(0));
  auto c = benchmark_config("pedagogical", Method::koh, 0);
  c["mcmc"]["steps"] = 200;
  c["mcmc"]["burn_in"] = 20;
  c["mcmc"]["chains"] = 4;
  const PreparedRun run = prepare_run(c, ".");
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  for (auto _ : state) benchmark::DoNotOptimize(calibrate(run.calibration, *run.model, run.data));
  omp_set_num_threads(saved);
}

}  // namespace

BENCHMARK(BM_GramSerial)->Arg(100)->Arg(630)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramParallel)->Arg(100)->Arg(630)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BandSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BandParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Chains)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
