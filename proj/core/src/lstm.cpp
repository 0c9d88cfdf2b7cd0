// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/model.hpp"

namespace groklab {

Var forward_lstm(Tape& tape, const LSTMConfig& config, const ParamBinder& params,
                 const Batch& batch, LstmTrace* trace) {
  config.validate();
  if (batch.seq < 1) throw ContractError("forward_lstm: need seq >= 1");
  const int b = batch.batch;
  const int s = batch.seq;

  Var emb = embedding_lookup(tape, params["embed.tokens"], batch.ids);
  emb = reshape(tape, emb, {b, s, config.embed_dim});

  Var h = tape.input(Tensor({b, config.hidden}));
  Var c = tape.input(Tensor({b, config.hidden}));
  auto gate = [&](Var x_t, const char* g) {
    Var wx = matmul(tape, x_t, params[std::string("lstm.wx.") + g]);
    Var wh = matmul(tape, h, params[std::string("lstm.wh.") + g]);
    return add(tape, add(tape, wx, wh), params[std::string("lstm.b.") + g]);
  };
  for (int step = 0; step < s; ++step) {
    Var x_t = select_position(tape, emb, step);
    Var f = sigmoid(tape, gate(x_t, "f"));
    Var i = sigmoid(tape, gate(x_t, "i"));
    Var o = sigmoid(tape, gate(x_t, "o"));
    Var cand = tanh_act(tape, gate(x_t, "c"));
    c = add(tape, mul(tape, f, c), mul(tape, i, cand));
    h = mul(tape, o, tanh_act(tape, c));
    if (trace) {
      trace->hidden.push_back(tape.value(h).values());
      trace->cell.push_back(tape.value(c).values());
    }
  }
  return add(tape, matmul(tape, h, params["head.w"]), params["head.b"]);
}

}  // namespace groklab
