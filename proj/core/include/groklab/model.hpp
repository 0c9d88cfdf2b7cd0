// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "groklab/dataset.hpp"
#include "groklab/tape.hpp"

namespace groklab {

enum class Positional { learned, sinusoidal };

/// Decoder-only transformer with causal masking. The full model is 2 layers,
/// d_model 128, 4 heads, FFN 512; the simplified variant is the same block
/// once. Layer norm is on by default with a switch, since the reference
/// experiments never state it; readout is from the final sequence position.
struct TransformerConfig {
  int n_layers = 2;
  int d_model = 128;
  int n_heads = 4;
  int head_dim = 32;
  int ffn_hidden = 512;
  int vocab_size = 0;
  int seq_len = 0;      // 3 (simple encoding) or 4 (dictionary encoding)
  int n_outputs = 0;    // p for simple encoding, vocab for dictionary
  bool use_layer_norm = true;
  Positional positional = Positional::learned;
  double init_scale = 1.0;

  static TransformerConfig full(int vocab_size, int seq_len, int n_outputs);
  static TransformerConfig simplified(int vocab_size, int seq_len, int n_outputs);
  void validate() const;
};

/// Feed-forward classifier over the concatenated token embeddings of the
/// 3-token simple encoding. n_layers counts affine layers: 2 means
/// input -> hidden(relu) -> logits, mirroring the transformer FFN.
struct MLPConfig {
  int hidden = 512;
  int n_layers = 2;
  int vocab_size = 0;
  int embed_dim = 128;
  int n_outputs = 0;
  double init_scale = 1.0;
  void validate() const;
};

/// Single LSTM cell consuming the token embeddings sequentially; the final
/// hidden state feeds a linear head.
struct LSTMConfig {
  int hidden = 20;
  int vocab_size = 0;
  int embed_dim = 128;
  int n_outputs = 0;
  double init_scale = 1.0;
  void validate() const;
};

using ModelConfig = std::variant<TransformerConfig, MLPConfig, LSTMConfig>;

const char* arch_tag(const ModelConfig& config);  // "transformer"|"mlp"|"lstm"
int config_vocab_size(const ModelConfig& config);
int config_n_outputs(const ModelConfig& config);

/// Named parameter collection. Iteration order is sorted by path; that order
/// is the contract for initialization draws, optimizer noise streams, and
/// checkpoint layout.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(std::string arch) : arch_(std::move(arch)) {}

  const std::string& arch() const { return arch_; }
  bool contains(const std::string& path) const;
  Tensor& at(const std::string& path);
  const Tensor& at(const std::string& path) const;
  void insert(const std::string& path, Tensor t);

  std::map<std::string, Tensor>& tensors() { return tensors_; }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  std::size_t count() const { return tensors_.size(); }

 private:
  std::string arch_;
  std::map<std::string, Tensor> tensors_;  // sorted by path
};

struct ParamSpec {
  std::string path;
  Shape shape;
  double fan_in = 1.0;
  enum class Fill { gaussian, zeros, ones } fill = Fill::gaussian;
};

/// The parameter layout implied by a config, sorted by path.
std::vector<ParamSpec> param_specs(const ModelConfig& config);

/// Draws weights from N(0, init_scale^2 / fan_in) using a GaussianStream
/// seeded with `seed`; biases start at zero, layer-norm gains at one. Draws
/// happen in sorted-path order, coordinates ascending, so the result is a
/// pure function of (config, seed).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Total element count. With include_embeddings = false the token-embedding
/// and unembedding tables ("embed.tokens", "unembed.*") are excluded;
/// positional embeddings count as non-embedding parameters.
std::int64_t count_params(const ModelParams& params, bool include_embeddings);

/// Token batch: `ids` is row-major batch x seq, `targets` one class per row.
struct Batch {
  int batch = 0;
  int seq = 0;
  std::vector<int> ids;
  std::vector<int> targets;
};

enum class Encoding { simple, dictionary };
const char* to_string(Encoding e);

/// Turns examples into model-ready batches for one encoding.
class Encoder {
 public:
  Encoder(Encoding kind, const ModTask& task);
  Encoder(Encoding kind, const ModTask& task, TokenVocab vocab);

  Encoding kind() const { return kind_; }
  int seq_len() const { return kind_ == Encoding::simple ? 3 : 4; }
  int vocab_size() const;
  int n_outputs() const;
  Batch encode(std::span<const Example> examples) const;

 private:
  Encoding kind_;
  ModTask task_;
  TokenVocab vocab_;
};

/// Binds every parameter of a model to tape vars, in sorted-path order.
/// The trainable binding writes gradients back into the ModelParams tensors
/// on backward; the frozen binding is for evaluation and never mutates the
/// source.
class ParamBinder {
 public:
  ParamBinder(Tape& tape, ModelParams& params);              // trainable
  ParamBinder(Tape& tape, const ModelParams& params);        // frozen
  /// Frozen binding with one path routed to an existing var; this is how the
  /// gradient checker probes a single parameter.
  ParamBinder(Tape& tape, const ModelParams& params, const std::string& override_path,
              Var override_var);
  Var operator[](const std::string& path) const;

 private:
  std::map<std::string, Var> vars_;
};

struct LstmTrace {
  std::vector<std::vector<double>> hidden;  // per step, batch x hidden flat
  std::vector<std::vector<double>> cell;
};

struct ForwardExtras {
  Var final_hidden{};                        // transformer: batch x seq x d
  std::vector<double>* attn_weights = nullptr;
  LstmTrace* lstm_trace = nullptr;
};

Var forward_transformer(Tape& tape, const TransformerConfig& config,
                        const ParamBinder& params, const Batch& batch,
                        ForwardExtras* extras = nullptr);
Var forward_mlp(Tape& tape, const MLPConfig& config, const ParamBinder& params,
                const Batch& batch);
Var forward_lstm(Tape& tape, const LSTMConfig& config, const ParamBinder& params,
                 const Batch& batch, LstmTrace* trace = nullptr);
Var forward_model(Tape& tape, const ModelConfig& config,
                  const ParamBinder& params, const Batch& batch,
                  ForwardExtras* extras = nullptr);

/// Checkpoint file: one JSON header line with the config, then one line per
/// parameter `path|shape|base64(little-endian doubles)`, sorted by path.
void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ModelParams& params);
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path);

}  // namespace groklab
