// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "groklab/model.hpp"

namespace groklab {

namespace {

Tensor sinusoidal_table(int seq_len, int d_model) {
  Tensor pe({seq_len, d_model});
  for (int pos = 0; pos < seq_len; ++pos) {
    for (int i = 0; i < d_model; i += 2) {
      const double rate = std::pow(10000.0, -static_cast<double>(i) / d_model);
      pe.at(pos, i) = std::sin(pos * rate);
      if (i + 1 < d_model) pe.at(pos, i + 1) = std::cos(pos * rate);
    }
  }
  return pe;
}

}  // namespace

Var forward_transformer(Tape& tape, const TransformerConfig& config,
                        const ParamBinder& params, const Batch& batch,
                        ForwardExtras* extras) {
  config.validate();
  if (batch.seq != config.seq_len) {
    throw ContractError("forward_transformer: batch seq " + std::to_string(batch.seq) +
                        " does not match config seq_len " +
                        std::to_string(config.seq_len));
  }
  const int b = batch.batch;
  const int s = config.seq_len;
  const int d = config.d_model;

  Var x = embedding_lookup(tape, params["embed.tokens"], batch.ids);
  x = reshape(tape, x, {b, s, d});
  if (config.positional == Positional::learned) {
    x = add_positional(tape, x, params["embed.pos"]);
  } else {
    x = add_positional(tape, x, tape.input(sinusoidal_table(s, d)));
  }

  for (int l = 0; l < config.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    // Pre-norm block: x + attn(ln(x)), then x + ffn(ln(x)).
    Var h = config.use_layer_norm
                ? layer_norm(tape, x, params[p + "ln1.gain"], params[p + "ln1.bias"])
                : x;
    Var q = add(tape, matmul(tape, h, params[p + "attn.wq"]), params[p + "attn.bq"]);
    Var kk = add(tape, matmul(tape, h, params[p + "attn.wk"]), params[p + "attn.bk"]);
    Var v = add(tape, matmul(tape, h, params[p + "attn.wv"]), params[p + "attn.bv"]);
    Var attn = causal_attention(tape, q, kk, v, config.n_heads,
                                extras ? extras->attn_weights : nullptr);
    Var attn_out =
        add(tape, matmul(tape, attn, params[p + "attn.wo"]), params[p + "attn.bo"]);
    x = add(tape, x, attn_out);

    Var h2 = config.use_layer_norm
                 ? layer_norm(tape, x, params[p + "ln2.gain"], params[p + "ln2.bias"])
                 : x;
    Var f = relu(tape, add(tape, matmul(tape, h2, params[p + "ffn.w1"]),
                           params[p + "ffn.b1"]));
    Var f2 = add(tape, matmul(tape, f, params[p + "ffn.w2"]), params[p + "ffn.b2"]);
    x = add(tape, x, f2);
  }

  if (config.use_layer_norm) {
    x = layer_norm(tape, x, params["final.ln.gain"], params["final.ln.bias"]);
  }
  if (extras) extras->final_hidden = x;
  // Single-answer classification: read the final sequence position only.
  Var last = select_position(tape, x, s - 1);
  return add(tape, matmul(tape, last, params["unembed.w"]), params["unembed.b"]);
}

}  // namespace groklab
