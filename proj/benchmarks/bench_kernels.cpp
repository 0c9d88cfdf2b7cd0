// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "groklab/harness.hpp"
#include "groklab/kernels.hpp"
#include "groklab/rng.hpp"
#include "groklab/sweep.hpp"

namespace {

using namespace groklab;

std::vector<double> rand_vec(std::int64_t n, std::uint64_t seed) {
  std::vector<double> v(static_cast<std::size_t>(n));
  SplitMix64 rng(seed);
  for (auto& x : v) x = rng.next_unit() * 2.0 - 1.0;
  return v;
}

void BM_matmul(benchmark::State& state) {
  const std::int64_t m = state.range(0);
  const std::int64_t k = state.range(1);
  const std::int64_t n = state.range(2);
  const auto a = rand_vec(m * k, 1);
  const auto b = rand_vec(k * n, 2);
  std::vector<double> c(static_cast<std::size_t>(m * n));
  for (auto _ : state) {
    kernels::matmul(a.data(), b.data(), c.data(), m, k, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * m * k * n);
}
BENCHMARK(BM_matmul)
    ->Args({8466, 128, 128})   // attention projections, full-batch alpha=0.3
    ->Args({8466, 128, 512})   // ffn expand
    ->Args({8466, 512, 128})   // ffn contract
    ->Args({2822, 128, 97});   // unembedding

void BM_transformer_forward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const ModelConfig cfg = make_model_config("transformer-simplified", Encoding::simple, 97);
  const ModelParams params = init_params(cfg, 0);
  const Encoder encoder(Encoding::simple, ModTask{97});
  const auto universe = enumerate_pairs(97);
  const Batch b = encoder.encode(
      std::span(universe).subspan(0, static_cast<std::size_t>(batch)));
  for (auto _ : state) {
    Tape tape;
    ParamBinder binder(tape, params);
    Var logits = forward_model(tape, cfg, binder, b);
    benchmark::DoNotOptimize(tape.value(logits).data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_transformer_forward)->Arg(512)->Arg(2822)->Unit(benchmark::kMillisecond);

void BM_training_step(benchmark::State& state) {
  const ModelConfig cfg = make_model_config("transformer-simplified", Encoding::simple, 97);
  ModelParams params = init_params(cfg, 0);
  OptimConfig opt = make_variant("adamw-wd1");
  OptimState opt_state = OptimState::for_params(params, opt.kind);
  const Encoder encoder(Encoding::simple, ModTask{97});
  const Split split = split_dataset(ModTask{97}, 0.3, 0);
  const Batch batch = encoder.encode(split.train);
  for (auto _ : state) {
    Tape tape;
    ParamBinder binder(tape, params);
    Var logits = forward_model(tape, cfg, binder, batch);
    Var loss = cross_entropy(tape, logits, batch.targets);
    tape.backward(loss);
    optimizer_step(params, opt_state, opt);
    benchmark::DoNotOptimize(params.at("unembed.b").data());
  }
}
BENCHMARK(BM_training_step)->Unit(benchmark::kMillisecond)->Iterations(8);

}  // namespace

BENCHMARK_MAIN();
