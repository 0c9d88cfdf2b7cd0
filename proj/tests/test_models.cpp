// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "groklab/model.hpp"
#include "groklab/sweep.hpp"

using namespace groklab;

namespace {

bool same_bytes(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

TransformerConfig toy_transformer() {
  TransformerConfig cfg;
  cfg.n_layers = 1;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.head_dim = 4;
  cfg.ffn_hidden = 16;
  cfg.vocab_size = 7;
  cfg.seq_len = 4;
  cfg.n_outputs = 7;
  return cfg;
}

}  // namespace

TEST_CASE("init_params is a pure function of (config, seed)") {
  const ModelConfig cfg = make_model_config("mlp", Encoding::simple, 7);
  const ModelParams a = init_params(cfg, 5);
  const ModelParams b = init_params(cfg, 5);
  const ModelParams c = init_params(cfg, 6);
  bool all_equal = true;
  bool any_differs = false;
  for (const auto& [path, tensor] : a.tensors()) {
    all_equal = all_equal && same_bytes(tensor, b.at(path));
    any_differs = any_differs || !same_bytes(tensor, c.at(path));
  }
  CHECK(all_equal);
  CHECK(any_differs);
}

TEST_CASE("init_scale 0 zeroes every weight") {
  MLPConfig cfg;
  cfg.vocab_size = 8;
  cfg.n_outputs = 7;
  cfg.init_scale = 0.0;
  const ModelParams params = init_params(cfg, 3);
  for (const auto& [path, tensor] : params.tensors()) {
    for (double v : tensor.values()) CHECK(v == 0.0);
  }
}

TEST_CASE("mlp parameter count matches the hand count") {
  MLPConfig cfg;  // hidden 512, 2 affine layers, embed 128
  cfg.vocab_size = 98;
  cfg.n_outputs = 97;
  const ModelParams params = init_params(cfg, 0);
  // wiring: concat(3 x 128) -> 512 relu -> 97
  const std::int64_t w1 = (3 * 128) * 512, b1 = 512;
  const std::int64_t w2 = 512 * 97, b2 = 97;
  const std::int64_t expected_non_embed = w1 + b1 + w2 + b2;
  CHECK(expected_non_embed == 246881);
  CHECK(count_params(params, false) == expected_non_embed);
  // include_embeddings toggles by exactly vocab * embed_dim (no unembedding here)
  CHECK(count_params(params, true) - count_params(params, false) == 98 * 128);
}

TEST_CASE("full transformer non-embedding count is near 4e5") {
  const ModelConfig cfg = make_model_config("transformer", Encoding::simple, 97);
  const ModelParams params = init_params(cfg, 0);
  const std::int64_t non_embed = count_params(params, false);
  CHECK(non_embed >= 300000);
  CHECK(non_embed <= 500000);
  // +-25% of 4e5
  CHECK(std::abs(static_cast<double>(non_embed) - 4e5) <= 1e5);
  // toggle = token embedding + unembedding tables
  CHECK(count_params(params, true) - non_embed == 98 * 128 + (128 * 97 + 97));
}

TEST_CASE("simplified transformer count is ~2e5 (not the cited ~1e5)") {
  const ModelConfig cfg = make_model_config("transformer-simplified", Encoding::simple, 97);
  const ModelParams params = init_params(cfg, 0);
  // one block: 4 d^2 attn + 4 d biases + d*f + f + f*d + d ffn + 2*2d ln,
  // plus final ln and learned positions
  const std::int64_t block = 4 * 128 * 128 + 4 * 128 + 128 * 512 + 512 +
                             512 * 128 + 128 + 4 * 128;
  const std::int64_t expected = block + 2 * 128 + 3 * 128;
  CHECK(count_params(params, false) == expected);
  CHECK(expected == 198912);
}

TEST_CASE("transformer rejects wrong sequence length") {
  const TransformerConfig cfg = toy_transformer();
  const ModelParams params = init_params(cfg, 1);
  Batch batch;
  batch.batch = 1;
  batch.seq = 3;
  batch.ids = {0, 1, 2};
  batch.targets = {0};
  Tape tape;
  ParamBinder binder(tape, params);
  CHECK_THROWS_AS(forward_transformer(tape, cfg, binder, batch), ContractError);
}

TEST_CASE("permuting the batch permutes logits rows identically") {
  const TransformerConfig cfg = toy_transformer();
  const ModelParams params = init_params(cfg, 2);
  Batch batch;
  batch.batch = 3;
  batch.seq = 4;
  batch.ids = {0, 5, 1, 6, 2, 5, 3, 6, 4, 5, 0, 6};
  batch.targets = {1, 3, 4};
  Tape tape;
  ParamBinder binder(tape, params);
  const Tensor base = tape.value(forward_transformer(tape, cfg, binder, batch));

  Batch perm;
  perm.batch = 3;
  perm.seq = 4;
  perm.ids = {4, 5, 0, 6, 0, 5, 1, 6, 2, 5, 3, 6};  // rows 2, 0, 1
  perm.targets = {4, 1, 3};
  Tape tape2;
  ParamBinder binder2(tape2, params);
  const Tensor moved = tape2.value(forward_transformer(tape2, cfg, binder2, perm));
  const int c = cfg.n_outputs;
  const int from[3] = {2, 0, 1};
  for (int r = 0; r < 3; ++r) {
    for (int j = 0; j < c; ++j) CHECK(moved.at(r, j) == base.at(from[r], j));
  }
}

TEST_CASE("hidden states never depend on later tokens") {
  const TransformerConfig cfg = toy_transformer();
  const ModelParams params = init_params(cfg, 3);
  Batch batch;
  batch.batch = 1;
  batch.seq = 4;
  batch.ids = {1, 2, 3, 4};
  batch.targets = {0};
  Tape tape;
  ParamBinder binder(tape, params);
  ForwardExtras extras;
  forward_transformer(tape, cfg, binder, batch, &extras);
  const Tensor base = tape.value(extras.final_hidden);

  for (int perturbed = 1; perturbed < 4; ++perturbed) {
    Batch mod = batch;
    mod.ids[static_cast<std::size_t>(perturbed)] =
        (mod.ids[static_cast<std::size_t>(perturbed)] + 3) % cfg.vocab_size;
    Tape tape2;
    ParamBinder binder2(tape2, params);
    ForwardExtras extras2;
    forward_transformer(tape2, cfg, binder2, mod, &extras2);
    const Tensor& hidden = tape2.value(extras2.final_hidden);
    for (int i = 0; i < perturbed; ++i) {
      for (int e = 0; e < cfg.d_model; ++e) CHECK(hidden.at(0, i, e) == base.at(0, i, e));
    }
  }
}

TEST_CASE("zero-weight mlp predicts uniformly") {
  MLPConfig cfg;
  cfg.vocab_size = 98;
  cfg.n_outputs = 97;
  cfg.init_scale = 0.0;
  const ModelParams params = init_params(cfg, 0);
  const Encoder encoder(Encoding::simple, ModTask{97});
  const auto all = enumerate_pairs(97);
  const Batch batch = encoder.encode(std::span(all).subspan(0, 32));
  Tape tape;
  ParamBinder binder(tape, params);
  Var logits = forward_mlp(tape, cfg, binder, batch);
  Var loss = cross_entropy(tape, logits, batch.targets);
  // exact per row; the mean over 32 rows rounds in the last ulp
  CHECK(tape.value(loss).at(0) == doctest::Approx(std::log(97.0)).epsilon(1e-15));
  for (double v : tape.value(logits).values()) CHECK(v == 0.0);
}

TEST_CASE("identical batch rows give identical logits") {
  MLPConfig cfg;
  cfg.vocab_size = 8;
  cfg.n_outputs = 7;
  const ModelParams params = init_params(cfg, 9);
  const Encoder encoder(Encoding::simple, ModTask{7});
  const std::vector<Example> examples = {{1, 2, 3}, {1, 2, 3}, {4, 4, 1}};
  const Batch batch = encoder.encode(examples);
  Tape tape;
  ParamBinder binder(tape, params);
  const Tensor& logits = tape.value(forward_mlp(tape, cfg, binder, batch));
  for (int j = 0; j < 7; ++j) CHECK(logits.at(0, j) == logits.at(1, j));
}

TEST_CASE("mlp rejects non-3-token input") {
  MLPConfig cfg;
  cfg.vocab_size = 8;
  cfg.n_outputs = 7;
  const ModelParams params = init_params(cfg, 9);
  Batch batch;
  batch.batch = 1;
  batch.seq = 4;
  batch.ids = {0, 1, 2, 3};
  batch.targets = {0};
  Tape tape;
  ParamBinder binder(tape, params);
  CHECK_THROWS_AS(forward_mlp(tape, cfg, binder, batch), ContractError);
}

TEST_CASE("all-zero lstm keeps state at zero and logits equal") {
  LSTMConfig cfg;
  cfg.hidden = 4;
  cfg.vocab_size = 6;
  cfg.embed_dim = 3;
  cfg.n_outputs = 5;
  cfg.init_scale = 0.0;
  const ModelParams params = init_params(cfg, 0);
  Batch batch;
  batch.batch = 2;
  batch.seq = 3;
  batch.ids = {0, 1, 2, 3, 4, 5};
  batch.targets = {0, 0};
  Tape tape;
  ParamBinder binder(tape, params);
  LstmTrace trace;
  const Tensor& logits = tape.value(forward_lstm(tape, cfg, binder, batch, &trace));
  for (const auto& cell : trace.cell) {
    for (double v : cell) CHECK(v == 0.0);  // c_t = 0.5*0 + 0.5*tanh(0)
  }
  for (double v : logits.values()) CHECK(v == logits.at(0, 0));
}

namespace {

// Independent scalar unroll of the gate equations, for the oracle test.
struct LstmRef {
  int e, h;
  const ModelParams& p;
  std::vector<double> hidden, cell;

  LstmRef(int embed, int hid, const ModelParams& params)
      : e(embed), h(hid), p(params), hidden(static_cast<std::size_t>(hid), 0.0),
        cell(static_cast<std::size_t>(hid), 0.0) {}

  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  void step(const std::vector<double>& x) {
    auto gate = [&](const char* name, int j) {
      const Tensor& wx = p.at(std::string("lstm.wx.") + name);
      const Tensor& wh = p.at(std::string("lstm.wh.") + name);
      const Tensor& b = p.at(std::string("lstm.b.") + name);
      double acc = 0.0;
      for (int i = 0; i < e; ++i) acc += x[static_cast<std::size_t>(i)] * wx.at(i, j);
      for (int i = 0; i < h; ++i) acc += hidden[static_cast<std::size_t>(i)] * wh.at(i, j);
      return acc + b.at(j);
    };
    std::vector<double> nh(static_cast<std::size_t>(h)), nc(static_cast<std::size_t>(h));
    for (int j = 0; j < h; ++j) {
      const double f = sigmoid(gate("f", j));
      const double i_g = sigmoid(gate("i", j));
      const double o = sigmoid(gate("o", j));
      const double cand = std::tanh(gate("c", j));
      nc[static_cast<std::size_t>(j)] = f * cell[static_cast<std::size_t>(j)] + i_g * cand;
      nh[static_cast<std::size_t>(j)] = o * std::tanh(nc[static_cast<std::size_t>(j)]);
    }
    hidden = nh;
    cell = nc;
  }
};

}  // namespace

TEST_CASE("lstm recurrence matches a hand unroll at hidden=2") {
  LSTMConfig cfg;
  cfg.hidden = 2;
  cfg.vocab_size = 5;
  cfg.embed_dim = 3;
  cfg.n_outputs = 4;
  const ModelParams params = init_params(cfg, 77);
  const std::vector<int> ids = {1, 4, 0, 2};

  Batch batch;
  batch.batch = 1;
  batch.seq = 4;
  batch.ids = ids;
  batch.targets = {0};
  Tape tape;
  ParamBinder binder(tape, params);
  LstmTrace trace;
  forward_lstm(tape, cfg, binder, batch, &trace);
  REQUIRE(trace.hidden.size() == 4);

  LstmRef ref(3, 2, params);
  const Tensor& table = params.at("embed.tokens");
  for (std::size_t step = 0; step < ids.size(); ++step) {
    std::vector<double> x(3);
    for (int i = 0; i < 3; ++i) x[static_cast<std::size_t>(i)] = table.at(ids[step], i);
    ref.step(x);
    for (int j = 0; j < 2; ++j) {
      CHECK(trace.hidden[step][static_cast<std::size_t>(j)] ==
            doctest::Approx(ref.hidden[static_cast<std::size_t>(j)]).epsilon(1e-12));
      CHECK(trace.cell[step][static_cast<std::size_t>(j)] ==
            doctest::Approx(ref.cell[static_cast<std::size_t>(j)]).epsilon(1e-12));
    }
  }

  // truncating the sequence reproduces the prefix states
  for (int keep = 1; keep <= 4; ++keep) {
    Batch shorter;
    shorter.batch = 1;
    shorter.seq = keep;
    shorter.ids.assign(ids.begin(), ids.begin() + keep);
    shorter.targets = {0};
    Tape tape2;
    ParamBinder binder2(tape2, params);
    LstmTrace trace2;
    forward_lstm(tape2, cfg, binder2, shorter, &trace2);
    for (int j = 0; j < 2; ++j) {
      CHECK(trace2.hidden.back()[static_cast<std::size_t>(j)] ==
            trace.hidden[static_cast<std::size_t>(keep - 1)][static_cast<std::size_t>(j)]);
    }
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const ModelConfig cfg = make_model_config("transformer-simplified", Encoding::simple, 7);
  const ModelParams params = init_params(cfg, 321);
  const std::string path = "test_checkpoint.grok";
  save_checkpoint(path, cfg, params);
  auto [loaded_cfg, loaded] = load_checkpoint(path);
  CHECK(std::string(arch_tag(loaded_cfg)) == "transformer");
  CHECK(loaded.count() == params.count());
  for (const auto& [name, tensor] : params.tensors()) {
    CHECK(same_bytes(tensor, loaded.at(name)));
  }

  // lines after the header are sorted by path
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  std::string prev;
  while (std::getline(in, line)) {
    const std::string name = line.substr(0, line.find('|'));
    CHECK(prev < name);
    prev = name;
  }
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoint reports the line") {
  const std::string path = "test_checkpoint_bad.grok";
  {
    std::ofstream out(path);
    out << R"({"arch":"mlp","config":{"hidden":4,"n_layers":2,"vocab_size":5,)"
        << R"("embed_dim":3,"n_outputs":4,"init_scale":1.0}})" << "\n";
    out << "w|2x2|not-base64!\n";
  }
  try {
    load_checkpoint(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("logit widths follow the encoding") {
  {
    const ModelConfig cfg = make_model_config("transformer-simplified", Encoding::simple, 7);
    CHECK(config_n_outputs(cfg) == 7);
    CHECK(config_vocab_size(cfg) == 8);
  }
  {
    const ModelConfig cfg =
        make_model_config("transformer-simplified", Encoding::dictionary, 7);
    CHECK(config_n_outputs(cfg) == 9);  // p + 2 dictionary targets
    CHECK(config_vocab_size(cfg) == 9);
  }
  CHECK_THROWS_AS(make_model_config("mlp", Encoding::dictionary, 7), ConfigError);
  CHECK_THROWS_AS(make_model_config("gru", Encoding::simple, 7), ConfigError);
}
