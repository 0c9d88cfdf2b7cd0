// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/model.hpp"

namespace groklab {

Var forward_mlp(Tape& tape, const MLPConfig& config, const ParamBinder& params,
                const Batch& batch) {
  config.validate();
  if (batch.seq != 3) {
    throw ContractError("forward_mlp: expects the 3-token simple encoding, got seq " +
                        std::to_string(batch.seq));
  }
  Var x = embedding_lookup(tape, params["embed.tokens"], batch.ids);
  // (batch*3) x embed_dim rows are contiguous per example; viewing them as
  // batch x (3*embed_dim) is the concatenation of the token embeddings.
  x = reshape(tape, x, {batch.batch, 3 * config.embed_dim});
  for (int l = 1; l <= config.n_layers; ++l) {
    const std::string idx = std::to_string(l);
    x = add(tape, matmul(tape, x, params["mlp.w" + idx]), params["mlp.b" + idx]);
    if (l < config.n_layers) x = relu(tape, x);
  }
  return x;
}

}  // namespace groklab
