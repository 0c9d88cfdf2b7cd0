// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "groklab/model.hpp"
#include "groklab/rng.hpp"

namespace groklab {

TransformerConfig TransformerConfig::full(int vocab_size, int seq_len, int n_outputs) {
  TransformerConfig c;
  c.n_layers = 2;
  c.vocab_size = vocab_size;
  c.seq_len = seq_len;
  c.n_outputs = n_outputs;
  c.validate();
  return c;
}

TransformerConfig TransformerConfig::simplified(int vocab_size, int seq_len,
                                                int n_outputs) {
  TransformerConfig c;
  c.n_layers = 1;
  c.vocab_size = vocab_size;
  c.seq_len = seq_len;
  c.n_outputs = n_outputs;
  c.validate();
  return c;
}

void TransformerConfig::validate() const {
  if (n_layers < 1) throw ConfigError("transformer: n_layers must be >= 1");
  if (n_heads * head_dim != d_model) {
    throw ConfigError("transformer: n_heads * head_dim must equal d_model");
  }
  if (seq_len != 3 && seq_len != 4) {
    throw ConfigError("transformer: seq_len must be 3 or 4, got " +
                      std::to_string(seq_len));
  }
  if (vocab_size < 2 || n_outputs < 2) {
    throw ConfigError("transformer: vocab_size and n_outputs must be >= 2");
  }
  if (ffn_hidden < 1) throw ConfigError("transformer: ffn_hidden must be >= 1");
}

void MLPConfig::validate() const {
  if (n_layers < 1) throw ConfigError("mlp: n_layers must be >= 1");
  if (hidden < 1 || embed_dim < 1) throw ConfigError("mlp: hidden/embed_dim must be >= 1");
  if (vocab_size < 2 || n_outputs < 2) {
    throw ConfigError("mlp: vocab_size and n_outputs must be >= 2");
  }
}

void LSTMConfig::validate() const {
  if (hidden < 1) throw ConfigError("lstm: hidden must be >= 1");
  if (embed_dim < 1) throw ConfigError("lstm: embed_dim must be >= 1");
  if (vocab_size < 2 || n_outputs < 2) {
    throw ConfigError("lstm: vocab_size and n_outputs must be >= 2");
  }
}

const char* arch_tag(const ModelConfig& config) {
  if (std::holds_alternative<TransformerConfig>(config)) return "transformer";
  if (std::holds_alternative<MLPConfig>(config)) return "mlp";
  return "lstm";
}

int config_vocab_size(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.vocab_size; }, config);
}

int config_n_outputs(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.n_outputs; }, config);
}

bool ModelParams::contains(const std::string& path) const {
  return tensors_.count(path) != 0;
}

Tensor& ModelParams::at(const std::string& path) {
  auto it = tensors_.find(path);
  if (it == tensors_.end()) throw IndexError("no parameter named " + path);
  return it->second;
}

const Tensor& ModelParams::at(const std::string& path) const {
  auto it = tensors_.find(path);
  if (it == tensors_.end()) throw IndexError("no parameter named " + path);
  return it->second;
}

void ModelParams::insert(const std::string& path, Tensor t) {
  if (!tensors_.emplace(path, std::move(t)).second) {
    throw ConfigError("duplicate parameter path " + path);
  }
}

namespace {

void transformer_specs(const TransformerConfig& c, std::vector<ParamSpec>& out) {
  const double d = c.d_model;
  out.push_back({"embed.tokens", {c.vocab_size, c.d_model}, d, ParamSpec::Fill::gaussian});
  if (c.positional == Positional::learned) {
    out.push_back({"embed.pos", {c.seq_len, c.d_model}, d, ParamSpec::Fill::gaussian});
  }
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
      out.push_back({p + "attn." + w, {c.d_model, c.d_model}, d, ParamSpec::Fill::gaussian});
    }
    // No key bias: softmax rows are invariant to a constant shift of the
    // keys, so such a parameter would be unlearnable.
    for (const char* b : {"bq", "bv", "bo"}) {
      out.push_back({p + "attn." + b, {c.d_model}, d, ParamSpec::Fill::zeros});
    }
    out.push_back({p + "ffn.w1", {c.d_model, c.ffn_hidden}, d, ParamSpec::Fill::gaussian});
    out.push_back({p + "ffn.b1", {c.ffn_hidden}, d, ParamSpec::Fill::zeros});
    out.push_back({p + "ffn.w2",
                   {c.ffn_hidden, c.d_model},
                   static_cast<double>(c.ffn_hidden),
                   ParamSpec::Fill::gaussian});
    out.push_back({p + "ffn.b2", {c.d_model}, d, ParamSpec::Fill::zeros});
    if (c.use_layer_norm) {
      out.push_back({p + "ln1.gain", {c.d_model}, d, ParamSpec::Fill::ones});
      out.push_back({p + "ln1.bias", {c.d_model}, d, ParamSpec::Fill::zeros});
      out.push_back({p + "ln2.gain", {c.d_model}, d, ParamSpec::Fill::ones});
      out.push_back({p + "ln2.bias", {c.d_model}, d, ParamSpec::Fill::zeros});
    }
  }
  if (c.use_layer_norm) {
    out.push_back({"final.ln.gain", {c.d_model}, d, ParamSpec::Fill::ones});
    out.push_back({"final.ln.bias", {c.d_model}, d, ParamSpec::Fill::zeros});
  }
  out.push_back({"unembed.w", {c.d_model, c.n_outputs}, d, ParamSpec::Fill::gaussian});
  out.push_back({"unembed.b", {c.n_outputs}, d, ParamSpec::Fill::zeros});
}

void mlp_specs(const MLPConfig& c, std::vector<ParamSpec>& out) {
  out.push_back({"embed.tokens",
                 {c.vocab_size, c.embed_dim},
                 static_cast<double>(c.embed_dim),
                 ParamSpec::Fill::gaussian});
  int in_dim = 3 * c.embed_dim;  // 3-token simple encoding, concatenated
  for (int l = 1; l <= c.n_layers; ++l) {
    const int out_dim = (l == c.n_layers) ? c.n_outputs : c.hidden;
    const std::string idx = std::to_string(l);
    out.push_back({"mlp.w" + idx,
                   {in_dim, out_dim},
                   static_cast<double>(in_dim),
                   ParamSpec::Fill::gaussian});
    out.push_back({"mlp.b" + idx,
                   {out_dim},
                   static_cast<double>(in_dim),
                   ParamSpec::Fill::zeros});
    in_dim = out_dim;
  }
}

void lstm_specs(const LSTMConfig& c, std::vector<ParamSpec>& out) {
  out.push_back({"embed.tokens",
                 {c.vocab_size, c.embed_dim},
                 static_cast<double>(c.embed_dim),
                 ParamSpec::Fill::gaussian});
  for (const char* gate : {"f", "i", "o", "c"}) {
    out.push_back({std::string("lstm.wx.") + gate,
                   {c.embed_dim, c.hidden},
                   static_cast<double>(c.embed_dim),
                   ParamSpec::Fill::gaussian});
    out.push_back({std::string("lstm.wh.") + gate,
                   {c.hidden, c.hidden},
                   static_cast<double>(c.hidden),
                   ParamSpec::Fill::gaussian});
    out.push_back({std::string("lstm.b.") + gate,
                   {c.hidden},
                   static_cast<double>(c.hidden),
                   ParamSpec::Fill::zeros});
  }
  out.push_back({"head.w",
                 {c.hidden, c.n_outputs},
                 static_cast<double>(c.hidden),
                 ParamSpec::Fill::gaussian});
  out.push_back({"head.b", {c.n_outputs}, static_cast<double>(c.hidden),
                 ParamSpec::Fill::zeros});
}

}  // namespace

std::vector<ParamSpec> param_specs(const ModelConfig& config) {
  std::vector<ParamSpec> out;
  std::visit(
      [&out](const auto& c) {
        c.validate();
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TransformerConfig>) {
          transformer_specs(c, out);
        } else if constexpr (std::is_same_v<T, MLPConfig>) {
          mlp_specs(c, out);
        } else {
          lstm_specs(c, out);
        }
      },
      config);
  std::sort(out.begin(), out.end(),
            [](const ParamSpec& a, const ParamSpec& b) { return a.path < b.path; });
  return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  const double init_scale =
      std::visit([](const auto& c) { return c.init_scale; }, config);
  GaussianStream stream(seed);
  ModelParams params(arch_tag(config));
  // Draw order: paths ascending, coordinates ascending.
  for (const ParamSpec& spec : param_specs(config)) {
    Tensor t(spec.shape);
    switch (spec.fill) {
      case ParamSpec::Fill::gaussian: {
        const double std_dev = init_scale / std::sqrt(spec.fan_in);
        for (auto& v : t.values()) v = stream.next() * std_dev;
        break;
      }
      case ParamSpec::Fill::zeros:
        break;
      case ParamSpec::Fill::ones:
        for (auto& v : t.values()) v = 1.0;
        break;
    }
    params.insert(spec.path, std::move(t));
  }
  return params;
}

std::int64_t count_params(const ModelParams& params, bool include_embeddings) {
  std::int64_t total = 0;
  for (const auto& [path, tensor] : params.tensors()) {
    if (!include_embeddings) {
      // Token-embedding and unembedding tables are the excluded set;
      // positional embeddings count as non-embedding parameters.
      if (path == "embed.tokens" || path.rfind("unembed.", 0) == 0) continue;
    }
    total += tensor.size();
  }
  return total;
}

const char* to_string(Encoding e) {
  return e == Encoding::simple ? "simple" : "dictionary";
}

Encoder::Encoder(Encoding kind, const ModTask& task)
    : kind_(kind), task_(task), vocab_(TokenVocab::standard(task.p)) {}

Encoder::Encoder(Encoding kind, const ModTask& task, TokenVocab vocab)
    : kind_(kind), task_(task), vocab_(std::move(vocab)) {}

int Encoder::vocab_size() const {
  // Simple encoding feeds tokens x, y, p, so ids span [0, p].
  return kind_ == Encoding::simple ? task_.p + 1 : vocab_.extent();
}

int Encoder::n_outputs() const {
  return kind_ == Encoding::simple ? task_.p : vocab_.extent();
}

Batch Encoder::encode(std::span<const Example> examples) const {
  Batch batch;
  batch.batch = static_cast<int>(examples.size());
  batch.seq = seq_len();
  batch.ids.reserve(examples.size() * static_cast<std::size_t>(batch.seq));
  batch.targets.reserve(examples.size());
  for (const Example& ex : examples) {
    if (kind_ == Encoding::simple) {
      const SimpleEncoded enc = encode_simple(ex, task_);
      batch.ids.insert(batch.ids.end(), enc.input.begin(), enc.input.end());
      batch.targets.push_back(enc.target);
    } else {
      const DictEncoded enc = encode_dictionary(ex, vocab_);
      batch.ids.insert(batch.ids.end(), enc.input.begin(), enc.input.end());
      batch.targets.push_back(enc.target);
    }
  }
  return batch;
}

ParamBinder::ParamBinder(Tape& tape, ModelParams& params) {
  for (auto& [path, tensor] : params.tensors()) {
    vars_.emplace(path, tape.leaf(tensor));
  }
}

ParamBinder::ParamBinder(Tape& tape, const ModelParams& params) {
  for (const auto& [path, tensor] : params.tensors()) {
    vars_.emplace(path, tape.input(tensor));
  }
}

ParamBinder::ParamBinder(Tape& tape, const ModelParams& params,
                         const std::string& override_path, Var override_var) {
  bool seen = false;
  for (const auto& [path, tensor] : params.tensors()) {
    if (path == override_path) {
      vars_.emplace(path, override_var);
      seen = true;
    } else {
      vars_.emplace(path, tape.input(tensor));
    }
  }
  if (!seen) throw IndexError("no parameter named " + override_path);
}

Var ParamBinder::operator[](const std::string& path) const {
  auto it = vars_.find(path);
  if (it == vars_.end()) throw IndexError("no bound parameter named " + path);
  return it->second;
}

Var forward_model(Tape& tape, const ModelConfig& config, const ParamBinder& params,
                  const Batch& batch, ForwardExtras* extras) {
  return std::visit(
      [&](const auto& c) -> Var {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TransformerConfig>) {
          return forward_transformer(tape, c, params, batch, extras);
        } else if constexpr (std::is_same_v<T, MLPConfig>) {
          return forward_mlp(tape, c, params, batch);
        } else {
          return forward_lstm(tape, c, params, batch,
                              extras ? extras->lstm_trace : nullptr);
        }
      },
      config);
}

}  // namespace groklab
