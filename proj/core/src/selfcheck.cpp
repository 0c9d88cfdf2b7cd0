// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/selfcheck.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "groklab/gradcheck.hpp"
#include "groklab/harness.hpp"
#include "groklab/optim.hpp"
#include "groklab/rng.hpp"
#include "groklab/sweep.hpp"

namespace groklab {

namespace {

Tensor rand_tensor(Shape shape, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  SplitMix64 rng(seed);
  for (auto& v : t.values()) v = lo + (hi - lo) * rng.next_unit();
  return t;
}

// Inputs pushed away from the relu kink so central differences stay valid.
Tensor rand_tensor_away_from_zero(Shape shape, std::uint64_t seed, double margin) {
  Tensor t = rand_tensor(std::move(shape), seed);
  for (auto& v : t.values()) {
    if (std::abs(v) < margin) v = v < 0.0 ? v - margin : v + margin;
  }
  return t;
}

std::string fmt_err(double err) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "max rel err %.2e", err);
  return buf;
}

CheckResult fd_check(const std::string& name, const ScalarFn& f, const Tensor& x,
                     double tol, double h = 1e-4) {
  const double err = finite_diff_check(f, x, h);
  return {name, err < tol, fmt_err(err) + (err < tol ? " < " : " >= ") + std::to_string(tol)};
}

// Test fixture: relu forward with a deliberately broken backward that leaks
// gradient through negative inputs. The suite passes only if the gradient
// checker flags it.
Var corrupted_relu(Tape& t, Var x) {
  const Tensor& tx = t.value(x);
  Tensor out(tx.shape());
  for (std::int64_t i = 0; i < tx.size(); ++i) {
    out.at(static_cast<int>(i)) = std::max(0.0, tx.at(static_cast<int>(i)));
  }
  Var outv = t.emit(std::move(out), true);
  t.node(outv).backprop = [&t, x, outv]() {
    const std::vector<double>& g = t.node(outv).grad;
    std::vector<double>& dx = t.grad_buf(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
  };
  return outv;
}

Batch toy_batch(Encoding encoding, int p, int n_examples) {
  const Encoder encoder(encoding, ModTask{p});
  const std::vector<Example> all = enumerate_pairs(p);
  std::vector<Example> subset;
  for (int i = 0; i < n_examples; ++i) {
    subset.push_back(all[static_cast<std::size_t>((i * 7 + 3) % (p * p))]);
  }
  return encoder.encode(subset);
}

CheckResult model_fd_check(const std::string& name, const ModelConfig& config,
                           std::uint64_t seed, const Batch& batch, double tol) {
  const ModelParams params = init_params(config, seed);
  const double err = model_gradient_check(config, params, batch, 1e-4);
  return {name, err < tol, fmt_err(err) + (err < tol ? " < " : " >= ") + std::to_string(tol)};
}

}  // namespace

std::vector<CheckResult> run_selfchecks() {
  std::vector<CheckResult> results;
  const double tol = 1e-6;
  const double model_tol = 1e-4;

  // --- per-op gradient checks ---
  {
    Tensor a = rand_tensor({5, 4}, 11);
    Tensor b = rand_tensor({4, 3}, 12);
    double err = finite_diff_check(
        [&b](Tape& t, Var vx) {
          return sum(t, matmul(t, vx, t.input(b)));
        },
        a, 1e-4);
    err = std::max(err, finite_diff_check(
                            [&a](Tape& t, Var vx) {
                              return sum(t, matmul(t, t.input(a), vx));
                            },
                            b, 1e-4));
    results.push_back({"gradcheck/matmul", err < tol, fmt_err(err)});
  }
  {
    Tensor x = rand_tensor({2, 3}, 21);
    Tensor bias = rand_tensor({3}, 22);
    double err = finite_diff_check(
        [&x](Tape& t, Var vb) {
          return sum(t, add(t, t.input(x), vb));
        },
        bias, 1e-4);
    results.push_back({"gradcheck/add-bias-broadcast", err < tol, fmt_err(err)});
  }
  {
    Tensor a = rand_tensor({4, 5}, 31);
    Tensor b = rand_tensor({4, 5}, 32);
    double err = finite_diff_check(
        [&b](Tape& t, Var vx) {
          return sum(t, mul(t, vx, t.input(b)));
        },
        a, 1e-4);
    results.push_back({"gradcheck/elementwise-mul", err < tol, fmt_err(err)});
  }
  {
    Tensor x = rand_tensor_away_from_zero({3, 7}, 41, 1e-3);
    results.push_back(fd_check(
        "gradcheck/relu", [](Tape& t, Var vx) { return sum(t, relu(t, vx)); }, x, tol));
  }
  {
    Tensor x = rand_tensor({3, 6}, 51);
    Tensor w = rand_tensor({6}, 52);
    double err = finite_diff_check(
        [&w](Tape& t, Var vx) {
          return sum(t, mul(t, softmax(t, vx), t.input(w)));
        },
        x, 1e-4);
    results.push_back({"gradcheck/softmax", err < tol, fmt_err(err)});
  }
  {
    Tensor logits = rand_tensor({4, 5}, 61);
    const std::vector<int> labels = {1, 0, 4, 2};
    results.push_back(fd_check(
        "gradcheck/cross-entropy",
        [&labels](Tape& t, Var vx) { return cross_entropy(t, vx, labels); }, logits,
        tol));
  }
  {
    Tensor table = rand_tensor({6, 3}, 71);
    const std::vector<int> ids = {2, 0, 2, 5};  // repeated id exercises scatter-add
    Tensor w = rand_tensor({4, 3}, 72);
    double err = finite_diff_check(
        [&ids, &w](Tape& t, Var vx) {
          return sum(t, mul(t, embedding_lookup(t, vx, ids), t.input(w)));
        },
        table, 1e-4);
    results.push_back({"gradcheck/embedding-lookup", err < tol, fmt_err(err)});
  }
  {
    Tensor x = rand_tensor({3, 5}, 81);
    Tensor gain = rand_tensor({5}, 82, 0.5, 1.5);
    Tensor bias = rand_tensor({5}, 83);
    Tensor w = rand_tensor({3, 5}, 84);
    double err = finite_diff_check(
        [&gain, &bias, &w](Tape& t, Var vx) {
          return sum(t, mul(t, layer_norm(t, vx, t.input(gain), t.input(bias)), t.input(w)));
        },
        x, 1e-4);
    err = std::max(err, finite_diff_check(
                            [&x, &bias, &w](Tape& t, Var vg) {
                              return sum(t, mul(t, layer_norm(t, t.input(x), vg, t.input(bias)),
                                                t.input(w)));
                            },
                            gain, 1e-4));
    results.push_back({"gradcheck/layer-norm", err < 1e-5, fmt_err(err)});
  }
  {
    // q/k/v all derived from one leaf so every backward path is exercised.
    Tensor x = rand_tensor({2, 4, 6}, 91, -1.0, 1.0);
    Tensor w = rand_tensor({2, 4, 6}, 92);
    double err = finite_diff_check(
        [&w](Tape& t, Var vx) {
          Var attn = causal_attention(t, vx, vx, vx, 2);
          return sum(t, mul(t, attn, t.input(w)));
        },
        x, 1e-4);
    results.push_back({"gradcheck/causal-attention", err < tol, fmt_err(err)});
  }

  // --- end-to-end model gradients at toy sizes ---
  {
    TransformerConfig cfg;
    cfg.n_layers = 2;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.head_dim = 4;
    cfg.ffn_hidden = 16;
    cfg.vocab_size = 8;
    cfg.seq_len = 3;
    cfg.n_outputs = 7;
    results.push_back(model_fd_check("gradcheck/transformer-end-to-end", cfg, 1001,
                                     toy_batch(Encoding::simple, 7, 5), model_tol));
  }
  {
    MLPConfig cfg;
    cfg.hidden = 16;
    cfg.vocab_size = 8;
    cfg.embed_dim = 6;
    cfg.n_outputs = 7;
    results.push_back(model_fd_check("gradcheck/mlp-end-to-end", cfg, 1002,
                                     toy_batch(Encoding::simple, 7, 6), model_tol));
  }
  {
    LSTMConfig cfg;
    cfg.hidden = 5;
    cfg.vocab_size = 9;
    cfg.embed_dim = 6;
    cfg.n_outputs = 9;
    results.push_back(model_fd_check("gradcheck/lstm-end-to-end", cfg, 1003,
                                     toy_batch(Encoding::dictionary, 7, 5), model_tol));
  }

  // --- negative control ---
  {
    Tensor x = rand_tensor_away_from_zero({3, 5}, 111, 1e-2);
    const double err = finite_diff_check(
        [](Tape& t, Var vx) { return sum(t, corrupted_relu(t, vx)); }, x, 1e-4);
    results.push_back({"gradcheck/negative-control",
                       err > 1e-2,
                       "corrupted relu backward detected with " + fmt_err(err)});
  }

  // --- optimizer oracles ---
  {
    // Independent scalar recurrence for three Adam steps, constant gradient.
    const double lr = 1e-3, b1 = 0.9, b2 = 0.98, eps = 1e-8, g = 4.0;
    double theta_ref = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double mh = m / (1 - std::pow(b1, t));
      const double vh = v / (1 - std::pow(b2, t));
      theta_ref -= lr * mh / (std::sqrt(vh) + eps);
    }
    ModelParams params("test");
    params.insert("w", Tensor::scalar(0.0));
    params.at("w").ensure_grad();
    params.at("w").grad()[0] = g;
    OptimConfig cfg;
    cfg.kind = OptimKind::adam;
    cfg.lr = lr;
    OptimState state = OptimState::for_params(params, cfg.kind);
    for (int t = 0; t < 3; ++t) adam_step(params, state, cfg);
    const double diff = std::abs(params.at("w").at(0) - theta_ref);
    results.push_back({"optim/adam-scalar-oracle", diff <= 1e-15,
                       "disagreement " + fmt_err(diff)});
  }
  {
    // Coupled L2 vs decoupled decay must diverge with nonzero gradient.
    const double lr = 1e-3, b1 = 0.9, b2 = 0.98, eps = 1e-8, lambda = 1.0;
    auto run = [&](bool decoupled) {
      ModelParams params("test");
      params.insert("w", Tensor::scalar(1.0));
      params.at("w").ensure_grad();
      OptimConfig cfg;
      cfg.kind = decoupled ? OptimKind::adamw : OptimKind::adam;
      cfg.lr = lr;
      if (decoupled) {
        cfg.weight_decay = lambda;
      } else {
        cfg.l2_coeff = lambda;
      }
      OptimState state = OptimState::for_params(params, cfg.kind);
      for (int t = 0; t < 3; ++t) {
        params.at("w").grad()[0] = 1.0;
        optimizer_step(params, state, cfg);
      }
      return params.at("w").at(0);
    };
    // Matching hand recurrences.
    auto oracle = [&](bool decoupled) {
      double theta = 1.0, m = 0.0, v = 0.0;
      for (int t = 1; t <= 3; ++t) {
        const double g = decoupled ? 1.0 : 1.0 + lambda * theta;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        theta -= lr * mh / (std::sqrt(vh) + eps);
        if (decoupled) theta -= lr * lambda * theta;
      }
      return theta;
    };
    const double coupled = run(false), decoupled = run(true);
    const bool distinct = std::abs(coupled - decoupled) > 1e-12;
    const bool matches = std::abs(coupled - oracle(false)) <= 1e-15 &&
                         std::abs(decoupled - oracle(true)) <= 1e-15;
    results.push_back({"optim/adamw-decoupling", distinct && matches,
                       distinct ? "trajectories split and match oracles"
                                : "coupled and decoupled agree unexpectedly"});
  }
  {
    // SGD: L2 and decay trajectories must agree bit-for-bit.
    bool equal = true;
    SplitMix64 rng(2024);
    for (int rep = 0; rep < 20 && equal; ++rep) {
      const double lambda = (rep % 3 == 0) ? 0.01 : (rep % 3 == 1 ? 0.1 : 1.0);
      ModelParams a("test"), b("test");
      Tensor w0({4});
      for (auto& v : w0.values()) v = rng.next_unit() * 2.0 - 1.0;
      a.insert("w", w0);
      b.insert("w", w0);
      OptimConfig ca, cb;
      ca.kind = cb.kind = OptimKind::sgd;
      ca.lr = cb.lr = 0.05;
      ca.l2_coeff = lambda;
      cb.weight_decay = lambda;
      OptimState sa = OptimState::for_params(a, ca.kind);
      OptimState sb = OptimState::for_params(b, cb.kind);
      for (int step = 0; step < 25 && equal; ++step) {
        Tensor g({4});
        for (auto& v : g.values()) v = rng.next_unit() * 2.0 - 1.0;
        a.at("w").ensure_grad();
        b.at("w").ensure_grad();
        a.at("w").grad() = g.values();
        b.at("w").grad() = g.values();
        sgd_step(a, sa, ca);
        sgd_step(b, sb, cb);
        equal = std::memcmp(a.at("w").values().data(), b.at("w").values().data(),
                            4 * sizeof(double)) == 0;
      }
    }
    results.push_back({"optim/sgd-l2-decay-equivalence", equal,
                       equal ? "bit-for-bit over 20 random trajectories"
                             : "trajectories diverged"});
  }
  {
    // First Adam step magnitude ~ lr for any |g| >= 1.
    bool ok = true;
    for (double g : {1.0, 4.0, -713.0, 1e6}) {
      ModelParams params("test");
      params.insert("w", Tensor::scalar(0.0));
      params.at("w").ensure_grad();
      params.at("w").grad()[0] = g;
      OptimConfig cfg;
      cfg.kind = OptimKind::adam;
      cfg.lr = 1e-3;
      OptimState state = OptimState::for_params(params, cfg.kind);
      adam_step(params, state, cfg);
      const double mag = std::abs(params.at("w").at(0));
      ok = ok && mag >= 0.99 * cfg.lr && mag <= cfg.lr;
    }
    results.push_back({"optim/adam-first-step-magnitude", ok,
                       ok ? "|delta| within [0.99 lr, lr]" : "outside bounds"});
  }

  // --- dataset invariants ---
  {
    bool ok = true;
    std::string why = "disjointness, coverage, floor sizes, labels at p in {5, 11}";
    for (int p : {5, 11}) {
      for (double alpha : {0.3, 0.5, 0.7}) {
        const Split split = split_dataset(ModTask{p}, alpha, 7);
        const auto expected_train =
            static_cast<std::size_t>(std::floor(alpha * p * p));
        ok = ok && split.train.size() == expected_train;
        ok = ok && split.train.size() + split.val.size() ==
                       static_cast<std::size_t>(p) * static_cast<std::size_t>(p);
        std::vector<int> seen(static_cast<std::size_t>(p * p), 0);
        auto visit = [&](const std::vector<Example>& part) {
          for (const Example& ex : part) {
            ok = ok && ex.label == (ex.x + ex.y) % p;
            seen[static_cast<std::size_t>(ex.x * p + ex.y)] += 1;
          }
        };
        visit(split.train);
        visit(split.val);
        for (int count : seen) ok = ok && count == 1;
      }
    }
    results.push_back({"data/split-invariants", ok, ok ? why : "violated"});
  }
  {
    bool ok = true;
    const ModTask task{5};
    const TokenVocab vocab = TokenVocab::standard(5);
    for (const Example& ex : enumerate_pairs(5)) {
      ok = ok && decode_simple(encode_simple(ex, task), task) == ex;
      ok = ok && decode_dictionary(encode_dictionary(ex, vocab), vocab) == ex;
    }
    results.push_back({"data/encode-round-trips", ok,
                       ok ? "both encodings invert over all p=5 examples"
                          : "round trip failed"});
  }

  // --- engine properties ---
  {
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      Tensor x = rand_tensor({4, 9}, 300 + seed, -30.0, 30.0);
      Tape t;
      Var y = softmax(t, t.input(x));
      const Tensor& out = t.value(y);
      for (int r = 0; r < 4; ++r) {
        double s = 0.0;
        for (int c = 0; c < 9; ++c) s += out.at(r, c);
        worst = std::max(worst, std::abs(s - 1.0));
      }
    }
    ok = worst <= 1e-12;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max |row sum - 1| = %.2e", worst);
    results.push_back({"engine/softmax-row-sums", ok, buf});
  }

  return results;
}

}  // namespace groklab
