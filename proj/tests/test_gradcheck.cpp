// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "groklab/gradcheck.hpp"
#include "groklab/rng.hpp"

using namespace groklab;

namespace {

Tensor rand_tensor(Shape shape, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  SplitMix64 rng(seed);
  for (auto& v : t.values()) v = lo + (hi - lo) * rng.next_unit();
  return t;
}

}  // namespace

TEST_CASE("finite differences are near-exact on a quadratic") {
  const Tensor x = Tensor::row({1, 2});
  const double err =
      finite_diff_check([](Tape& t, Var v) { return sum(t, mul(t, v, v)); }, x, 1e-4);
  CHECK(err < 1e-8);
}

TEST_CASE("two-class linear model cross entropy") {
  const Tensor w = rand_tensor({3, 2}, 42, -1.0, 1.0);
  const Tensor inputs = rand_tensor({4, 3}, 43, -1.0, 1.0);
  const std::vector<int> labels = {0, 1, 1, 0};
  const double err = finite_diff_check(
      [&inputs, &labels](Tape& t, Var vw) {
        return cross_entropy(t, matmul(t, t.input(inputs), vw), labels);
      },
      w, 1e-4);
  CHECK(err < 1e-6);
}

TEST_CASE("constant function has zero error") {
  const Tensor x = Tensor::row({1, 2, 3});
  const double err = finite_diff_check(
      [](Tape& t, Var v) { return scale(t, sum(t, v), 0.0); }, x, 1e-4);
  CHECK(err < 1e-12);
}

TEST_CASE("h outside (0, 1e-2] is rejected") {
  const Tensor x = Tensor::row({1.0});
  auto f = [](Tape& t, Var v) { return sum(t, v); };
  CHECK_THROWS_AS(finite_diff_check(f, x, 0.0), DomainError);
  CHECK_THROWS_AS(finite_diff_check(f, x, 0.5), DomainError);
}

TEST_CASE("matmul gradient vs finite differences") {
  const Tensor a = rand_tensor({5, 4}, 7);
  const Tensor b = rand_tensor({4, 3}, 8);
  const double err = finite_diff_check(
      [&b](Tape& t, Var va) {
        return sum(t, matmul(t, va, t.input(b)));
      },
      a, 1e-4);
  CHECK(err < 1e-6);
}

TEST_CASE("relu gradient away from the kink") {
  Tensor x = rand_tensor({4, 4}, 9);
  for (auto& v : x.values()) {
    if (std::abs(v) < 1e-3) v += v < 0 ? -1e-3 : 1e-3;
  }
  const double err = finite_diff_check(
      [](Tape& t, Var v) { return sum(t, relu(t, v)); }, x, 1e-4);
  CHECK(err < 1e-6);
}

TEST_CASE("layer norm gradient") {
  const Tensor x = rand_tensor({3, 6}, 10);
  const Tensor gain = rand_tensor({6}, 11, 0.5, 1.5);
  const Tensor bias = rand_tensor({6}, 12);
  const Tensor w = rand_tensor({3, 6}, 13);
  const double err = finite_diff_check(
      [&gain, &bias, &w](Tape& t, Var vx) {
        return sum(t, mul(t, layer_norm(t, vx, t.input(gain), t.input(bias)), t.input(w)));
      },
      x, 1e-4);
  CHECK(err < 1e-5);
}

TEST_CASE("randomized op suite stays under 1e-4") {
  // bounded inputs in [-2, 2]; relu kink neighborhoods excluded above
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Tensor x = rand_tensor({2, 3, 4}, 100 + seed);
    const Tensor g = rand_tensor({2, 3, 4}, 200 + seed);
    const double err = finite_diff_check(
        [&g](Tape& t, Var v) {
          Var attn = causal_attention(t, v, v, v, 2);
          return sum(t, mul(t, attn, t.input(g)));
        },
        x, 1e-4);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("composite transformer params all pass finite differences") {
  TransformerConfig cfg;
  cfg.n_layers = 2;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.head_dim = 4;
  cfg.ffn_hidden = 16;
  cfg.vocab_size = 8;
  cfg.seq_len = 3;
  cfg.n_outputs = 7;
  const ModelParams params = init_params(cfg, 555);
  const Encoder encoder(Encoding::simple, ModTask{7});
  const auto all = enumerate_pairs(7);
  const std::vector<Example> subset(all.begin(), all.begin() + 5);
  const Batch batch = encoder.encode(subset);
  CHECK(model_gradient_check(cfg, params, batch, 1e-4) < 1e-4);
}
