#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "saesteer/sae.hpp"

namespace {

using namespace saesteer;

SaeParams random_params(std::size_t dict, std::size_t dim, SeededRng& rng) {
  SaeParams p;
  p.w_enc = DenseMatrix(dict, dim);
  p.w_dec = DenseMatrix(dict, dim);
  for (double& v : p.w_enc.data()) v = rng.normal() / std::sqrt(double(dim));
  for (double& v : p.w_dec.data()) v = rng.normal();
  normalize_decoder_rows(p);
  p.b_pre = Vector(dim, 0.0);
  return p;
}

void BM_TopKSelect(benchmark::State& state) {
  SeededRng rng(1);
  Vector v(static_cast<std::size_t>(state.range(0)));
  for (double& x : v) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(top_k_select(v, 64));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TopKSelect)->Arg(256)->Arg(4096)->Arg(16384);

void BM_Encode(benchmark::State& state) {
  SeededRng rng(2);
  const auto dict = static_cast<std::size_t>(state.range(0));
  const SaeParams p = random_params(dict, 32, rng);
  Vector x(32);
  for (double& v : x) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(encode(p, x, 8));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Encode)->Arg(256)->Arg(1024)->Arg(4096);

void BM_TrainStep(benchmark::State& state) {
  SeededRng rng(3);
  SaeConfig c;
  c.dict_size = static_cast<std::size_t>(state.range(0));
  c.input_dim = 32;
  c.k = 8;
  std::vector<Vector> batch(c.batch_size, Vector(32));
  for (auto& x : batch) {
    for (double& v : x) v = rng.normal();
  }
  SaeParams p = init_sae_params(c, batch, rng);
  SaeOptimizer opt(p);
  TrainStats stats(c.dict_size);
  for (auto _ : state) train_step(p, batch, c, opt, stats);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(c.batch_size));
}
BENCHMARK(BM_TrainStep)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
