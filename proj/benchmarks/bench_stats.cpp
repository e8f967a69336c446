#include <vector>

#include <benchmark/benchmark.h>

#include "saesteer/rng.hpp"
#include "saesteer/stats.hpp"

namespace {

using namespace saesteer;

std::vector<double> counts(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = static_cast<double>(rng.below(4));
  return v;
}

void BM_MannWhitneyExact(benchmark::State& state) {
  const auto a = counts(6, 1), b = counts(6, 2);
  for (auto _ : state) benchmark::DoNotOptimize(mann_whitney_exact(a, b));
}
BENCHMARK(BM_MannWhitneyExact);

void BM_MannWhitneyNormal(benchmark::State& state) {
  const auto a = counts(50, 1), b = counts(50, 2);
  for (auto _ : state) benchmark::DoNotOptimize(mann_whitney_normal(a, b));
}
BENCHMARK(BM_MannWhitneyNormal);

void BM_BootstrapCi(benchmark::State& state) {
  const auto a = counts(50, 3), b = counts(50, 4);
  BootstrapOptions o;
  o.resamples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_ci_d(a, b, o));
}
BENCHMARK(BM_BootstrapCi)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
