// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>

#include "doctest.h"
#include "groklab/optim.hpp"

using namespace groklab;

namespace {

ModelParams scalar_params(double theta, double grad) {
  ModelParams p("test");
  p.insert("w", Tensor::scalar(theta));
  p.at("w").ensure_grad();
  p.at("w").grad()[0] = grad;
  return p;
}

}  // namespace

TEST_CASE("warmup ramps linearly and clamps") {
  OptimConfig cfg;
  cfg.lr = 1e-3;
  cfg.warmup_steps = 10;
  CHECK(warmup_lr(cfg, 5) == doctest::Approx(5e-4).epsilon(1e-15));
  CHECK(warmup_lr(cfg, 10) == 1e-3);
  CHECK(warmup_lr(cfg, 1000) == 1e-3);
  cfg.warmup_steps = 0;
  CHECK(warmup_lr(cfg, 1) == 1e-3);
  CHECK_THROWS_AS(warmup_lr(cfg, 0), ContractError);
}

TEST_CASE("sgd decay shrinks parameters with zero gradient") {
  ModelParams p = scalar_params(2.0, 0.0);
  OptimConfig cfg;
  cfg.kind = OptimKind::sgd;
  cfg.lr = 0.1;
  cfg.weight_decay = 1.0;
  OptimState state = OptimState::for_params(p, cfg.kind);
  sgd_step(p, state, cfg);
  CHECK(p.at("w").at(0) == doctest::Approx(1.8).epsilon(1e-15));
}

TEST_CASE("plain sgd with zero decay") {
  ModelParams p = scalar_params(1.0, 0.25);
  OptimConfig cfg;
  cfg.kind = OptimKind::sgd;
  cfg.lr = 0.1;
  OptimState state = OptimState::for_params(p, cfg.kind);
  sgd_step(p, state, cfg);
  CHECK(p.at("w").at(0) == doctest::Approx(1.0 - 0.1 * 0.25).epsilon(1e-15));
}

TEST_CASE("sgd l2 and decay modes coincide bit-for-bit") {
  SplitMix64 rng(314);
  for (double lambda : {0.01, 0.1, 1.0}) {
    ModelParams a("test"), b("test");
    Tensor w0({8});
    for (auto& v : w0.values()) v = rng.next_unit() * 4.0 - 2.0;
    a.insert("w", w0);
    b.insert("w", w0);
    OptimConfig ca, cb;
    ca.kind = cb.kind = OptimKind::sgd;
    ca.lr = cb.lr = 0.07;
    ca.l2_coeff = lambda;
    cb.weight_decay = lambda;
    OptimState sa = OptimState::for_params(a, ca.kind);
    OptimState sb = OptimState::for_params(b, cb.kind);
    for (int step = 0; step < 50; ++step) {
      Tensor g({8});
      for (auto& v : g.values()) v = rng.next_unit() * 2.0 - 1.0;
      a.at("w").ensure_grad();
      b.at("w").ensure_grad();
      a.at("w").grad() = g.values();
      b.at("w").grad() = g.values();
      sgd_step(a, sa, ca);
      sgd_step(b, sb, cb);
      CHECK(std::memcmp(a.at("w").values().data(), b.at("w").values().data(),
                        8 * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("sgd rejects both decay modes at once") {
  ModelParams p = scalar_params(1.0, 0.0);
  OptimConfig cfg;
  cfg.kind = OptimKind::sgd;
  cfg.l2_coeff = 0.1;
  cfg.weight_decay = 0.1;
  OptimState state = OptimState::for_params(p, cfg.kind);
  CHECK_THROWS_AS(sgd_step(p, state, cfg), ConfigError);
}

TEST_CASE("adam first step has magnitude ~ lr") {
  ModelParams p = scalar_params(0.0, 4.0);
  OptimConfig cfg;
  cfg.kind = OptimKind::adam;
  cfg.lr = 1e-3;
  OptimState state = OptimState::for_params(p, cfg.kind);
  adam_step(p, state, cfg);
  // m_hat = 4, v_hat = 16, delta = -lr * 4 / (4 + eps)
  CHECK(p.at("w").at(0) == doctest::Approx(-1e-3).epsilon(1e-8));
  const double mag = std::abs(p.at("w").at(0));
  CHECK(mag >= 0.99e-3);
  CHECK(mag <= 1e-3);
}

TEST_CASE("adam with zero gradient and zero state keeps parameters") {
  ModelParams p = scalar_params(1.5, 0.0);
  OptimConfig cfg;
  cfg.kind = OptimKind::adam;
  OptimState state = OptimState::for_params(p, cfg.kind);
  adam_step(p, state, cfg);
  CHECK(p.at("w").at(0) == 1.5);
}

TEST_CASE("three adam steps match an independent scalar oracle") {
  const double lr = 2e-3, b1 = 0.9, b2 = 0.98, eps = 1e-8;
  const double grads[3] = {0.7, -1.3, 2.9};
  double theta = 0.4, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    theta -= lr * (m / (1 - std::pow(b1, t))) /
             (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
  }
  ModelParams p = scalar_params(0.4, 0.0);
  OptimConfig cfg;
  cfg.kind = OptimKind::adam;
  cfg.lr = lr;
  OptimState state = OptimState::for_params(p, cfg.kind);
  for (double g : grads) {
    p.at("w").grad()[0] = g;
    adam_step(p, state, cfg);
  }
  CHECK(std::abs(p.at("w").at(0) - theta) <= 1e-15);
  CHECK(state.t == 3);
}

TEST_CASE("adamw with zero gradient is pure decay") {
  ModelParams p = scalar_params(1.0, 0.0);
  OptimConfig cfg;
  cfg.kind = OptimKind::adamw;
  cfg.lr = 1e-3;
  cfg.weight_decay = 1.0;
  OptimState state = OptimState::for_params(p, cfg.kind);
  adamw_step(p, state, cfg);
  CHECK(p.at("w").at(0) == doctest::Approx(0.999).epsilon(1e-15));
}

TEST_CASE("adamw with zero decay equals adam bit-for-bit") {
  ModelParams a = scalar_params(0.8, 0.0);
  ModelParams b = scalar_params(0.8, 0.0);
  OptimConfig ca, cb;
  ca.kind = OptimKind::adam;
  cb.kind = OptimKind::adamw;
  OptimState sa = OptimState::for_params(a, ca.kind);
  OptimState sb = OptimState::for_params(b, cb.kind);
  for (int step = 0; step < 10; ++step) {
    const double g = 0.3 * (step + 1);
    a.at("w").grad()[0] = g;
    b.at("w").grad()[0] = g;
    adam_step(a, sa, ca);
    adamw_step(b, sb, cb);
    CHECK(a.at("w").at(0) == b.at("w").at(0));
  }
}

TEST_CASE("decoupled decay is observably different from coupled l2") {
  ModelParams coupled = scalar_params(1.0, 0.0);
  ModelParams decoupled = scalar_params(1.0, 0.0);
  OptimConfig cc, cd;
  cc.kind = OptimKind::adam;
  cc.l2_coeff = 1.0;
  cd.kind = OptimKind::adamw;
  cd.weight_decay = 1.0;
  OptimState sc = OptimState::for_params(coupled, cc.kind);
  OptimState sd = OptimState::for_params(decoupled, cd.kind);
  for (int step = 0; step < 3; ++step) {
    coupled.at("w").grad()[0] = 1.0;
    decoupled.at("w").grad()[0] = 1.0;
    optimizer_step(coupled, sc, cc);
    optimizer_step(decoupled, sd, cd);
  }
  CHECK(std::abs(coupled.at("w").at(0) - decoupled.at("w").at(0)) > 1e-12);
}

TEST_CASE("update noise moments and determinism") {
  OptimConfig cfg;
  cfg.update_noise_std = 1.0;
  {
    OptimConfig off;
    GaussianStream rng(5);
    const Tensor delta = Tensor::row({1, 2, 3});
    const Tensor out = apply_update_noise(delta, off, rng);
    CHECK(out.values() == delta.values());  // std 0: exact identity
  }
  {
    GaussianStream r1(123), r2(123);
    const Tensor delta({64});
    const Tensor a = apply_update_noise(delta, cfg, r1);
    const Tensor b = apply_update_noise(delta, cfg, r2);
    CHECK(a.values() == b.values());  // same seed, same stream
  }
  {
    GaussianStream rng(999);
    const std::int64_t n = 1000000;
    Tensor delta({1000, 1000});
    const Tensor noisy = apply_update_noise(delta, cfg, rng);
    double mean = 0.0;
    for (double v : noisy.values()) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : noisy.values()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    const double se = 1.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean) <= 4.0 * se);
    CHECK(std::abs(var - 1.0) <= 0.01);
  }
}

TEST_CASE("weight noise perturbs a forward view only") {
  OptimConfig cfg;
  cfg.weight_noise_std = 0.01;
  ModelParams params("test");
  params.insert("a", Tensor::row({1, 2, 3}));
  params.insert("b", Tensor::row({-1, -2, -3}));
  {
    OptimConfig off;
    GaussianStream rng(1);
    const ModelParams view = apply_weight_noise(params, off, rng);
    CHECK(view.at("a").values() == params.at("a").values());
  }
  GaussianStream rng(2);
  const ModelParams view = apply_weight_noise(params, cfg, rng);
  CHECK(view.at("a").values() != params.at("a").values());
  CHECK(params.at("a").values() == std::vector<double>{1, 2, 3});  // clean stays clean

  // applied sigma ~ 0.01 over many draws
  ModelParams big("test");
  big.insert("w", Tensor({1000, 1000}));
  GaussianStream rng2(3);
  const ModelParams noisy = apply_weight_noise(big, cfg, rng2);
  double var = 0.0;
  for (double v : noisy.at("w").values()) var += v * v;
  var /= 999999.0;
  CHECK(std::abs(std::sqrt(var) - 0.01) <= 0.0001);  // within 1%
}

TEST_CASE("make_variant pins the eight configurations") {
  const OptimConfig wd1 = make_variant("adamw-wd1");
  CHECK(wd1.kind == OptimKind::adamw);
  CHECK(wd1.lr == 1e-3);
  CHECK(wd1.weight_decay == 1.0);
  CHECK(wd1.batch_size == 0);
  CHECK(wd1.beta1 == 0.9);
  CHECK(wd1.beta2 == 0.98);
  CHECK(wd1.warmup_steps == 10);

  CHECK(make_variant("adam-lr-3x").lr == 3e-3);
  CHECK(make_variant("adam-lr-0.3x").lr == 3e-4);
  CHECK(make_variant("adam-minibatch-128").batch_size == 128);
  CHECK(make_variant("adam-update-noise").update_noise_std == 1.0);
  CHECK(make_variant("adam-weight-noise").weight_noise_std == 0.01);
  CHECK(make_variant("adamw-minibatch-128").batch_size == 128);
  CHECK(make_variant("adam-baseline").kind == OptimKind::adam);
  CHECK(variant_names().size() == 8);

  try {
    make_variant("sgd-fast");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("adamw-wd1") != std::string::npos);
  }
}

TEST_CASE("step counter equals the number of steps") {
  ModelParams p = scalar_params(0.0, 1.0);
  OptimConfig cfg;
  cfg.kind = OptimKind::adamw;
  OptimState state = OptimState::for_params(p, cfg.kind);
  for (int i = 0; i < 17; ++i) {
    p.at("w").grad()[0] = 1.0;
    optimizer_step(p, state, cfg);
  }
  CHECK(state.t == 17);
}

TEST_CASE("missing gradients are a contract error") {
  ModelParams p("test");
  p.insert("w", Tensor::scalar(1.0));
  OptimConfig cfg;
  cfg.kind = OptimKind::adam;
  OptimState state = OptimState::for_params(p, cfg.kind);
  CHECK_THROWS_AS(adam_step(p, state, cfg), ContractError);
}
