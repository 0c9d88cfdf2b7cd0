// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "groklab/tensor.hpp"

namespace groklab {

/// Handle to a tensor recorded on a Tape.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Ops append nodes in evaluation order, which is a valid
/// topological order of the compute graph; backward() replays the nodes in
/// exact reverse recording order. A tape and the tensors bound to it belong
/// to one worker; distinct tapes may run in parallel.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  /// Registers `param` as a differentiable leaf. backward() assigns the
  /// leaf's gradient into param.grad(); leaves that the loss does not reach
  /// get a zero gradient. `param` must outlive the backward() call — bind
  /// short-lived constants with input() instead.
  Var leaf(Tensor& param);

  /// Records a constant input; no gradient flows into it.
  Var input(Tensor value);

  const Tensor& value(Var v) const;
  /// Gradient of a node after backward(); empty span if unreachable.
  std::span<const double> grad(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and propagates through every recorded node in
  /// reverse order. `loss` must be scalar (ContractError otherwise); calling
  /// twice without reset() is a ContractError.
  void backward(Var loss);

  void reset();
  bool backward_run() const { return backward_run_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

  // --- op-author surface ---
  struct Node {
    Tensor value;
    std::vector<double> grad;     // allocated lazily during backward
    std::function<void()> backprop;
    Tensor* external = nullptr;   // leaf write-back target
    bool requires_grad = false;
  };
  /// Appends a node; the backprop callback may be attached afterwards.
  Var emit(Tensor value, bool requires_grad);
  Node& node(Var v);
  const Node& node(Var v) const;
  /// Gradient buffer of a node, allocated and zeroed on first use.
  std::vector<double>& grad_buf(Var v);

 private:
  std::vector<Node> nodes_;
  bool backward_run_ = false;
  void check(Var v) const;
};

enum class EwKind { add, sub, mul };

// Elementwise arithmetic. Shapes must match exactly, or `b` may be rank-1
// matching the last axis of `a` (bias broadcast); the broadcast axis sums
// gradients on the way back.
Var elementwise(Tape& t, EwKind kind, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);

/// a (m x k, or batched b x m x k) times b (k x n). Rank-3 `a` is a batch of
/// rank-2 slices sharing `b`.
Var matmul(Tape& t, Var a, Var b);

/// max(0, x). The subgradient at exactly 0 is 0 (documented; affects
/// bit-exact reproducibility).
Var relu(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
Var tanh_act(Tape& t, Var x);

/// Row softmax over the last axis, computed with max-subtraction. Rows sum
/// to 1 within 1e-12. Non-finite input raises NumericError.
Var softmax(Tape& t, Var x);

/// Mean negative log-likelihood -(1/N) sum_i log p(label_i) for logits
/// (N x C), computed via log-softmax; the gradient is (softmax - onehot)/N.
Var cross_entropy(Tape& t, Var logits, std::span<const int> labels);

/// Gathers rows of `table` (V x D); output row k is table row ids[k].
/// Backward scatter-adds, so repeated ids accumulate.
Var embedding_lookup(Tape& t, Var table, std::span<const int> ids);

/// Per-last-axis normalization to zero mean / unit variance, then an affine
/// map by rank-1 gain and bias.
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5);

/// Multi-head scaled dot-product self-attention with a causal mask: position
/// i attends to j <= i only. q, k, v are batch x seq x d_model; n_heads must
/// divide d_model. When `attn_weights_out` is given it receives the softmax
/// weights laid out [batch][head][i][j] with zeros above the diagonal.
Var causal_attention(Tape& t, Var q, Var k, Var v, int n_heads,
                     std::vector<double>* attn_weights_out = nullptr);

Var scale(Tape& t, Var x, double c);
Var sum(Tape& t, Var x);
Var reshape(Tape& t, Var x, Shape shape);
/// batch x seq x d -> batch x d, taking sequence position `pos`.
Var select_position(Tape& t, Var x, int pos);
/// x (batch x seq x d) + pos (seq x d), broadcast over the batch axis.
Var add_positional(Tape& t, Var x, Var pos);

}  // namespace groklab
