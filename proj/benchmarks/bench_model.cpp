#include <benchmark/benchmark.h>

#include "saesteer/config.hpp"
#include "saesteer/harness.hpp"

namespace {

using namespace saesteer;

ToyModel default_model() {
  ToyModelConfig c = default_run_config().model;
  c.seed = 1;
  return ToyModel(c);
}

void BM_Prefill(benchmark::State& state) {
  const ToyModel model = default_model();
  const auto scenarios = make_scenarios(1, 1, model.config().vocab_size);
  for (auto _ : state) benchmark::DoNotOptimize(forward_prefill(model, scenarios[0].prompt, nullptr));
}
BENCHMARK(BM_Prefill)->Unit(benchmark::kMicrosecond);

void BM_Rollout(benchmark::State& state) {
  const ToyModel model = default_model();
  const auto scenarios = make_scenarios(50, 1, model.config().vocab_size);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto& s = scenarios[seed % scenarios.size()];
    benchmark::DoNotOptimize(run_rollout(model, s, nullptr, seed++));
  }
}
BENCHMARK(BM_Rollout)->Unit(benchmark::kMicrosecond);

void BM_SteeredCondition(benchmark::State& state) {
  const ToyModel model = default_model();
  const auto scenarios = make_scenarios(50, 1, model.config().vocab_size);
  SteeringConfig steer;
  steer.vector.v = model.planted().effective_direction(Trait::autonomy);
  steer.vector.layer = 2;
  steer.vector.norm = 1.0;
  steer.multiplier = 2.0;
  for (auto _ : state) benchmark::DoNotOptimize(run_condition(model, scenarios, &steer, 1, "autonomy/all/2"));
}
BENCHMARK(BM_SteeredCondition)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
