// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "groklab/kernels.hpp"

namespace groklab {

namespace {

constexpr std::int64_t kParallelElems = 1 << 18;

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

// b broadcasts along the last axis of a (bias addition).
bool last_axis_broadcast(const Tensor& a, const Tensor& b) {
  return b.rank() == 1 && b.dim(0) == a.shape().back();
}

}  // namespace

Var Tape::emit(Tensor value, bool requires_grad) {
  Var v{static_cast<std::int32_t>(nodes_.size())};
  Node n;
  n.value = std::move(value);
  n.value.clear_grad();
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return v;
}

void Tape::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<std::int32_t>(nodes_.size())) {
    throw ContractError("Var does not belong to this tape");
  }
}

Tape::Node& Tape::node(Var v) {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::leaf(Tensor& param) {
  Var v = emit(param, true);
  nodes_.back().external = &param;
  return v;
}

Var Tape::input(Tensor value) { return emit(std::move(value), false); }

const Tensor& Tape::value(Var v) const { return node(v).value; }

std::span<const double> Tape::grad(Var v) const {
  const Node& n = node(v);
  return {n.grad.data(), n.grad.size()};
}

std::vector<double>& Tape::grad_buf(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad.assign(static_cast<std::size_t>(n.value.size()), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  check(loss);
  if (backward_run_) {
    throw ContractError("backward() already ran on this tape; call reset() first");
  }
  Node& ln = node(loss);
  if (ln.value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(ln.value.shape()));
  }
  ln.grad.assign(1, 1.0);
  // Exact reverse recording order; recording order is topological.
  for (std::int32_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.grad.empty() && n.backprop) n.backprop();
  }
  for (Node& n : nodes_) {
    if (!n.external) continue;
    n.external->ensure_grad();
    auto& g = n.external->grad();
    if (n.grad.empty()) {
      std::fill(g.begin(), g.end(), 0.0);  // unreachable leaves get zeros
    } else {
      std::copy(n.grad.begin(), n.grad.end(), g.begin());
    }
  }
  backward_run_ = true;
}

void Tape::reset() {
  nodes_.clear();
  backward_run_ = false;
}

// ----------------------------------------------------------------------
// elementwise

Var elementwise(Tape& t, EwKind kind, Var a, Var b) {
  const Tensor& ta = t.value(a);
  const Tensor& tb = t.value(b);
  const bool broadcast = !same_shape(ta, tb);
  if (broadcast && !last_axis_broadcast(ta, tb)) {
    throw DimensionError("elementwise: shapes " + shape_str(ta.shape()) + " and " +
                         shape_str(tb.shape()) + " are not broadcastable");
  }
  const std::int64_t n = ta.size();
  const std::int64_t c = ta.shape().back();
  Tensor out(ta.shape());
  const double* pa = ta.data();
  const double* pb = tb.data();
  double* po = out.data();
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
  for (std::int64_t i = 0; i < n; ++i) {
    const double bv = broadcast ? pb[i % c] : pb[i];
    switch (kind) {
      case EwKind::add: po[i] = pa[i] + bv; break;
      case EwKind::sub: po[i] = pa[i] - bv; break;
      case EwKind::mul: po[i] = pa[i] * bv; break;
    }
  }
  const bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, kind, a, b, outv, broadcast, n, c]() {
    const std::vector<double>& g = t.node(outv).grad;
    const double* pa2 = t.value(a).data();
    const double* pb2 = t.value(b).data();
    if (t.node(a).requires_grad) {
      std::vector<double>& da = t.grad_buf(a);
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
      for (std::int64_t i = 0; i < n; ++i) {
        switch (kind) {
          case EwKind::add:
          case EwKind::sub: da[i] += g[i]; break;
          case EwKind::mul: da[i] += g[i] * (broadcast ? pb2[i % c] : pb2[i]); break;
        }
      }
    }
    if (t.node(b).requires_grad) {
      std::vector<double>& db = t.grad_buf(b);
      if (broadcast) {
        // Broadcast axis sums gradients; rows accumulate in ascending order.
        for (std::int64_t i = 0; i < n; ++i) {
          const std::int64_t j = i % c;
          switch (kind) {
            case EwKind::add: db[j] += g[i]; break;
            case EwKind::sub: db[j] -= g[i]; break;
            case EwKind::mul: db[j] += g[i] * pa2[i]; break;
          }
        }
      } else {
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
        for (std::int64_t i = 0; i < n; ++i) {
          switch (kind) {
            case EwKind::add: db[i] += g[i]; break;
            case EwKind::sub: db[i] -= g[i]; break;
            case EwKind::mul: db[i] += g[i] * pa2[i]; break;
          }
        }
      }
    }
  };
  return outv;
}

Var add(Tape& t, Var a, Var b) { return elementwise(t, EwKind::add, a, b); }
Var sub(Tape& t, Var a, Var b) { return elementwise(t, EwKind::sub, a, b); }
Var mul(Tape& t, Var a, Var b) { return elementwise(t, EwKind::mul, a, b); }

// ----------------------------------------------------------------------
// matmul

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& ta = t.value(a);
  const Tensor& tb = t.value(b);
  if (tb.rank() != 2 || (ta.rank() != 2 && ta.rank() != 3)) {
    throw DimensionError("matmul: need rank-2/3 by rank-2, got " +
                         shape_str(ta.shape()) + " by " + shape_str(tb.shape()));
  }
  const std::int64_t k = ta.shape().back();
  if (k != tb.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_str(ta.shape()) +
                         " by " + shape_str(tb.shape()));
  }
  const std::int64_t m = ta.size() / k;  // rank-3 a is a batch of rank-2 slices
  const std::int64_t n = tb.dim(1);
  Shape out_shape = ta.shape();
  out_shape.back() = static_cast<int>(n);
  Tensor out(out_shape);
  kernels::matmul(ta.data(), tb.data(), out.data(), m, k, n, false);

  const bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, a, b, outv, m, k, n]() {
    const std::vector<double>& g = t.node(outv).grad;
    if (t.node(a).requires_grad) {
      // dA = dC * B^T
      std::vector<double> bt(static_cast<std::size_t>(n * k));
      kernels::transpose(t.value(b).data(), bt.data(), k, n);
      kernels::matmul(g.data(), bt.data(), t.grad_buf(a).data(), m, n, k, true);
    }
    if (t.node(b).requires_grad) {
      // dB = A^T * dC
      std::vector<double> at(static_cast<std::size_t>(k * m));
      kernels::transpose(t.value(a).data(), at.data(), m, k);
      kernels::matmul(at.data(), g.data(), t.grad_buf(b).data(), k, m, n, true);
    }
  };
  return outv;
}

// ----------------------------------------------------------------------
// activations

Var relu(Tape& t, Var x) {
  const Tensor& tx = t.value(x);
  const std::int64_t n = tx.size();
  Tensor out(tx.shape());
  const double* px = tx.data();
  double* po = out.data();
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
  for (std::int64_t i = 0; i < n; ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
  const bool rg = t.node(x).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, x, outv, n]() {
    const std::vector<double>& g = t.node(outv).grad;
    const double* px2 = t.value(x).data();
    std::vector<double>& dx = t.grad_buf(x);
    // x == 0 passes zero (subgradient choice, documented).
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
    for (std::int64_t i = 0; i < n; ++i) dx[i] += px2[i] > 0.0 ? g[i] : 0.0;
  };
  return outv;
}

Var sigmoid(Tape& t, Var x) {
  const Tensor& tx = t.value(x);
  const std::int64_t n = tx.size();
  Tensor out(tx.shape());
  const double* px = tx.data();
  double* po = out.data();
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
  for (std::int64_t i = 0; i < n; ++i) po[i] = 1.0 / (1.0 + std::exp(-px[i]));
  const bool rg = t.node(x).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, x, outv, n]() {
    const std::vector<double>& g = t.node(outv).grad;
    const double* py = t.value(outv).data();
    std::vector<double>& dx = t.grad_buf(x);
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
    for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * py[i] * (1.0 - py[i]);
  };
  return outv;
}

Var tanh_act(Tape& t, Var x) {
  const Tensor& tx = t.value(x);
  const std::int64_t n = tx.size();
  Tensor out(tx.shape());
  const double* px = tx.data();
  double* po = out.data();
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
  for (std::int64_t i = 0; i < n; ++i) po[i] = std::tanh(px[i]);
  const bool rg = t.node(x).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, x, outv, n]() {
    const std::vector<double>& g = t.node(outv).grad;
    const double* py = t.value(outv).data();
    std::vector<double>& dx = t.grad_buf(x);
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
    for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * (1.0 - py[i] * py[i]);
  };
  return outv;
}

// ----------------------------------------------------------------------
// softmax / cross-entropy

Var softmax(Tape& t, Var x) {
  const Tensor& tx = t.value(x);
  const std::int64_t n = tx.size();
  const std::int64_t c = tx.shape().back();
  const std::int64_t rows = n / c;
  const double* px = tx.data();
  for (std::int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(px[i])) {
      throw NumericError("softmax: non-finite input at flat index " + std::to_string(i));
    }
  }
  Tensor out(tx.shape());
  double* po = out.data();
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* in = px + r * c;
    double* o = po + r * c;
    double mx = in[0];
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, in[j]);
    double s = 0.0;
    for (std::int64_t j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - mx);
      s += o[j];
    }
    const double inv = 1.0 / s;
    for (std::int64_t j = 0; j < c; ++j) o[j] *= inv;
  }
  const bool rg = t.node(x).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, x, outv, rows, c]() {
    const std::vector<double>& g = t.node(outv).grad;
    const double* py = t.value(outv).data();
    std::vector<double>& dx = t.grad_buf(x);
#pragma omp parallel for schedule(static) if (rows * c >= kParallelElems)
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* y = py + r * c;
      const double* gr = g.data() + r * c;
      double dot = 0.0;
      for (std::int64_t j = 0; j < c; ++j) dot += gr[j] * y[j];
      double* d = dx.data() + r * c;
      for (std::int64_t j = 0; j < c; ++j) d[j] += y[j] * (gr[j] - dot);
    }
  };
  return outv;
}

Var cross_entropy(Tape& t, Var logits, std::span<const int> labels) {
  const Tensor& tz = t.value(logits);
  if (tz.rank() != 2) {
    throw DimensionError("cross_entropy: logits must be rank-2, got " +
                         shape_str(tz.shape()));
  }
  const std::int64_t rows = tz.dim(0);
  const std::int64_t c = tz.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(rows) + " rows");
  }
  for (std::int64_t i = 0; i < rows; ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw IndexError("cross_entropy: label " + std::to_string(labels[i]) +
                       " out of range [0, " + std::to_string(c) + ") at row " +
                       std::to_string(i));
    }
  }
  const double* pz = tz.data();
  auto lse = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  auto labels_copy = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  // log-softmax form: loss_i = lse_i - z[i, label_i]; never exp-then-log.
#pragma omp parallel for schedule(static) if (rows * c >= kParallelElems)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* z = pz + i * c;
    double mx = z[0];
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    double s = 0.0;
    for (std::int64_t j = 0; j < c; ++j) s += std::exp(z[j] - mx);
    (*lse)[static_cast<std::size_t>(i)] = mx + std::log(s);
  }
  double total = 0.0;
  for (std::int64_t i = 0; i < rows; ++i) {
    total += (*lse)[static_cast<std::size_t>(i)] - pz[i * c + (*labels_copy)[i]];
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(rows));
  const bool rg = t.node(logits).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, logits, outv, rows, c, lse, labels_copy]() {
    const double go = t.node(outv).grad[0];
    const double* pz2 = t.value(logits).data();
    std::vector<double>& dz = t.grad_buf(logits);
    const double inv_n = 1.0 / static_cast<double>(rows);
#pragma omp parallel for schedule(static) if (rows * c >= kParallelElems)
    for (std::int64_t i = 0; i < rows; ++i) {
      const double* z = pz2 + i * c;
      double* d = dz.data() + i * c;
      const double l = (*lse)[static_cast<std::size_t>(i)];
      const int lab = (*labels_copy)[static_cast<std::size_t>(i)];
      for (std::int64_t j = 0; j < c; ++j) {
        const double p = std::exp(z[j] - l);
        d[j] += go * inv_n * (p - (j == lab ? 1.0 : 0.0));
      }
    }
  };
  return outv;
}

// ----------------------------------------------------------------------
// embedding

Var embedding_lookup(Tape& t, Var table, std::span<const int> ids) {
  const Tensor& tt = t.value(table);
  if (tt.rank() != 2) {
    throw DimensionError("embedding_lookup: table must be rank-2, got " +
                         shape_str(tt.shape()));
  }
  const int v = tt.dim(0);
  const std::int64_t d = tt.dim(1);
  const std::int64_t n = static_cast<std::int64_t>(ids.size());
  for (std::int64_t i = 0; i < n; ++i) {
    if (ids[i] < 0 || ids[i] >= v) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[i]) +
                       " out of range [0, " + std::to_string(v) + ")");
    }
  }
  Tensor out({static_cast<int>(n), static_cast<int>(d)});
  const double* pt = tt.data();
  double* po = out.data();
#pragma omp parallel for schedule(static) if (n * d >= kParallelElems)
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy(pt + ids[i] * d, pt + (ids[i] + 1) * d, po + i * d);
  }
  auto ids_copy = std::make_shared<std::vector<int>>(ids.begin(), ids.end());
  const bool rg = t.node(table).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, table, outv, ids_copy, d]() {
    const std::vector<double>& g = t.node(outv).grad;
    std::vector<double>& dt = t.grad_buf(table);
    // Scatter-add in row order so repeated ids accumulate deterministically.
    const std::int64_t n2 = static_cast<std::int64_t>(ids_copy->size());
    for (std::int64_t i = 0; i < n2; ++i) {
      kernels::axpy(1.0, g.data() + i * d, dt.data() + (*ids_copy)[i] * d, d);
    }
  };
  return outv;
}

// ----------------------------------------------------------------------
// layer norm

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Tensor& tx = t.value(x);
  const Tensor& tg = t.value(gain);
  const Tensor& tb = t.value(bias);
  const std::int64_t c = tx.shape().back();
  if (tg.rank() != 1 || tb.rank() != 1 || tg.dim(0) != c || tb.dim(0) != c) {
    throw DimensionError("layer_norm: gain/bias must be rank-1 of size " +
                         std::to_string(c));
  }
  if (!(eps > 0.0)) throw DomainError("layer_norm: eps must be > 0");
  const std::int64_t rows = tx.size() / c;
  Tensor out(tx.shape());
  auto mean = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  auto inv = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  const double* px = tx.data();
  const double* pg = tg.data();
  const double* pb = tb.data();
  double* po = out.data();
#pragma omp parallel for schedule(static) if (rows * c >= kParallelElems)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* in = px + r * c;
    double mu = 0.0;
    for (std::int64_t j = 0; j < c; ++j) mu += in[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::int64_t j = 0; j < c; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(c);
    const double iv = 1.0 / std::sqrt(var + eps);
    (*mean)[static_cast<std::size_t>(r)] = mu;
    (*inv)[static_cast<std::size_t>(r)] = iv;
    double* o = po + r * c;
    for (std::int64_t j = 0; j < c; ++j) o[j] = (in[j] - mu) * iv * pg[j] + pb[j];
  }
  const bool rg =
      t.node(x).requires_grad || t.node(gain).requires_grad || t.node(bias).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, x, gain, bias, outv, rows, c, mean, inv]() {
    const std::vector<double>& g = t.node(outv).grad;
    const double* px2 = t.value(x).data();
    const double* pg2 = t.value(gain).data();
    if (t.node(gain).requires_grad || t.node(bias).requires_grad) {
      std::vector<double>& dgain = t.grad_buf(gain);
      std::vector<double>& dbias = t.grad_buf(bias);
      // Row-ascending accumulation keeps the reduction order fixed.
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* in = px2 + r * c;
        const double* gr = g.data() + r * c;
        const double mu = (*mean)[static_cast<std::size_t>(r)];
        const double iv = (*inv)[static_cast<std::size_t>(r)];
        for (std::int64_t j = 0; j < c; ++j) {
          dgain[j] += gr[j] * (in[j] - mu) * iv;
          dbias[j] += gr[j];
        }
      }
    }
    if (t.node(x).requires_grad) {
      std::vector<double>& dx = t.grad_buf(x);
#pragma omp parallel for schedule(static) if (rows * c >= kParallelElems)
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* in = px2 + r * c;
        const double* gr = g.data() + r * c;
        const double mu = (*mean)[static_cast<std::size_t>(r)];
        const double iv = (*inv)[static_cast<std::size_t>(r)];
        double h1 = 0.0, h2 = 0.0;
        for (std::int64_t j = 0; j < c; ++j) {
          const double xh = (in[j] - mu) * iv;
          const double dxh = gr[j] * pg2[j];
          h1 += dxh;
          h2 += dxh * xh;
        }
        h1 /= static_cast<double>(c);
        h2 /= static_cast<double>(c);
        double* d = dx.data() + r * c;
        for (std::int64_t j = 0; j < c; ++j) {
          const double xh = (in[j] - mu) * iv;
          d[j] += iv * (gr[j] * pg2[j] - h1 - xh * h2);
        }
      }
    }
  };
  return outv;
}

// ----------------------------------------------------------------------
// attention

Var causal_attention(Tape& t, Var q, Var k, Var v, int n_heads,
                     std::vector<double>* attn_weights_out) {
  const Tensor& tq = t.value(q);
  const Tensor& tk = t.value(k);
  const Tensor& tv = t.value(v);
  if (tq.rank() != 3 || !same_shape(tq, tk) || !same_shape(tq, tv)) {
    throw DimensionError("causal_attention: q/k/v must share a rank-3 shape, got " +
                         shape_str(tq.shape()) + ", " + shape_str(tk.shape()) + ", " +
                         shape_str(tv.shape()));
  }
  const std::int64_t batch = tq.dim(0);
  const std::int64_t s = tq.dim(1);
  const std::int64_t d = tq.dim(2);
  if (n_heads <= 0 || d % n_heads != 0) {
    throw DimensionError("causal_attention: n_heads " + std::to_string(n_heads) +
                         " must divide d_model " + std::to_string(d));
  }
  const std::int64_t hd = d / n_heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  // weights[b][h][i][j], zero for j > i (causal mask).
  auto w = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(batch * n_heads * s * s), 0.0);
  Tensor out({static_cast<int>(batch), static_cast<int>(s), static_cast<int>(d)});
  const double* pq = tq.data();
  const double* pk = tk.data();
  const double* pv = tv.data();
  double* po = out.data();
#pragma omp parallel for schedule(static) if (batch * s * d >= kParallelElems / 4)
  for (std::int64_t b = 0; b < batch; ++b) {
    for (int h = 0; h < n_heads; ++h) {
      const std::int64_t off = h * hd;
      double* wb = w->data() + ((b * n_heads + h) * s) * s;
      for (std::int64_t i = 0; i < s; ++i) {
        double* wrow = wb + i * s;
        const double* qi = pq + (b * s + i) * d + off;
        double mx = -1e300;
        for (std::int64_t j = 0; j <= i; ++j) {
          const double* kj = pk + (b * s + j) * d + off;
          double dot = 0.0;
          for (std::int64_t e = 0; e < hd; ++e) dot += qi[e] * kj[e];
          wrow[j] = dot * att_scale;
          mx = std::max(mx, wrow[j]);
        }
        double ssum = 0.0;
        for (std::int64_t j = 0; j <= i; ++j) {
          wrow[j] = std::exp(wrow[j] - mx);
          ssum += wrow[j];
        }
        const double invs = 1.0 / ssum;
        for (std::int64_t j = 0; j <= i; ++j) wrow[j] *= invs;
        double* oi = po + (b * s + i) * d + off;
        for (std::int64_t e = 0; e < hd; ++e) oi[e] = 0.0;
        for (std::int64_t j = 0; j <= i; ++j) {
          const double* vj = pv + (b * s + j) * d + off;
          const double wij = wrow[j];
          for (std::int64_t e = 0; e < hd; ++e) oi[e] += wij * vj[e];
        }
      }
    }
  }
  if (attn_weights_out) *attn_weights_out = *w;
  const bool rg = t.node(q).requires_grad || t.node(k).requires_grad ||
                  t.node(v).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, q, k, v, outv, batch, s, d, hd, n_heads, att_scale, w]() {
    const std::vector<double>& g = t.node(outv).grad;
    const double* pq2 = t.value(q).data();
    const double* pk2 = t.value(k).data();
    const double* pv2 = t.value(v).data();
    std::vector<double>& dq = t.grad_buf(q);
    std::vector<double>& dk = t.grad_buf(k);
    std::vector<double>& dv = t.grad_buf(v);
#pragma omp parallel for schedule(static) if (batch * s * d >= kParallelElems / 4)
    for (std::int64_t b = 0; b < batch; ++b) {
      std::vector<double> da(static_cast<std::size_t>(s), 0.0);
      std::vector<double> ds(static_cast<std::size_t>(s), 0.0);
      for (int h = 0; h < n_heads; ++h) {
        const std::int64_t off = h * hd;
        const double* wb = w->data() + ((b * n_heads + h) * s) * s;
        for (std::int64_t i = 0; i < s; ++i) {
          const double* wrow = wb + i * s;
          const double* gi = g.data() + (b * s + i) * d + off;
          // d(weights) then softmax backward within the causal row.
          double dot = 0.0;
          for (std::int64_t j = 0; j <= i; ++j) {
            const double* vj = pv2 + (b * s + j) * d + off;
            double acc = 0.0;
            for (std::int64_t e = 0; e < hd; ++e) acc += gi[e] * vj[e];
            da[static_cast<std::size_t>(j)] = acc;
            dot += wrow[j] * acc;
          }
          for (std::int64_t j = 0; j <= i; ++j) {
            ds[static_cast<std::size_t>(j)] =
                wrow[j] * (da[static_cast<std::size_t>(j)] - dot) * att_scale;
          }
          double* dqi = dq.data() + (b * s + i) * d + off;
          const double* qi = pq2 + (b * s + i) * d + off;
          for (std::int64_t j = 0; j <= i; ++j) {
            const double* kj = pk2 + (b * s + j) * d + off;
            const double* vj = pv2 + (b * s + j) * d + off;
            double* dkj = dk.data() + (b * s + j) * d + off;
            double* dvj = dv.data() + (b * s + j) * d + off;
            const double dsj = ds[static_cast<std::size_t>(j)];
            const double wij = wrow[j];
            for (std::int64_t e = 0; e < hd; ++e) {
              dqi[e] += dsj * kj[e];
              dkj[e] += dsj * qi[e];
              dvj[e] += wij * gi[e];
            }
          }
        }
      }
    }
  };
  return outv;
}

// ----------------------------------------------------------------------
// structural ops

Var scale(Tape& t, Var x, double cf) {
  const Tensor& tx = t.value(x);
  const std::int64_t n = tx.size();
  Tensor out(tx.shape());
  const double* px = tx.data();
  double* po = out.data();
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
  for (std::int64_t i = 0; i < n; ++i) po[i] = px[i] * cf;
  const bool rg = t.node(x).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, x, outv, n, cf]() {
    const std::vector<double>& g = t.node(outv).grad;
    std::vector<double>& dx = t.grad_buf(x);
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
    for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * cf;
  };
  return outv;
}

Var sum(Tape& t, Var x) {
  const Tensor& tx = t.value(x);
  const std::int64_t n = tx.size();
  const double* px = tx.data();
  double total = 0.0;  // ascending flat order
  for (std::int64_t i = 0; i < n; ++i) total += px[i];
  const bool rg = t.node(x).requires_grad;
  Var outv = t.emit(Tensor::scalar(total), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, x, outv, n]() {
    const double go = t.node(outv).grad[0];
    std::vector<double>& dx = t.grad_buf(x);
    for (std::int64_t i = 0; i < n; ++i) dx[i] += go;
  };
  return outv;
}

Var reshape(Tape& t, Var x, Shape shape) {
  const Tensor& tx = t.value(x);
  if (shape_size(shape) != tx.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(tx.shape()) + " as " +
                         shape_str(shape));
  }
  Tensor out(std::move(shape), tx.values());
  const bool rg = t.node(x).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, x, outv]() {
    const std::vector<double>& g = t.node(outv).grad;
    std::vector<double>& dx = t.grad_buf(x);
    kernels::axpy(1.0, g.data(), dx.data(), static_cast<std::int64_t>(g.size()));
  };
  return outv;
}

Var select_position(Tape& t, Var x, int pos) {
  const Tensor& tx = t.value(x);
  if (tx.rank() != 3) {
    throw DimensionError("select_position: need rank-3, got " + shape_str(tx.shape()));
  }
  const std::int64_t batch = tx.dim(0);
  const std::int64_t s = tx.dim(1);
  const std::int64_t d = tx.dim(2);
  if (pos < 0 || pos >= s) {
    throw IndexError("select_position: position " + std::to_string(pos) +
                     " out of range [0, " + std::to_string(s) + ")");
  }
  Tensor out({static_cast<int>(batch), static_cast<int>(d)});
  const double* px = tx.data();
  double* po = out.data();
#pragma omp parallel for schedule(static) if (batch * d >= kParallelElems)
  for (std::int64_t b = 0; b < batch; ++b) {
    std::copy(px + (b * s + pos) * d, px + (b * s + pos + 1) * d, po + b * d);
  }
  const bool rg = t.node(x).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, x, outv, batch, s, d, pos]() {
    const std::vector<double>& g = t.node(outv).grad;
    std::vector<double>& dx = t.grad_buf(x);
#pragma omp parallel for schedule(static) if (batch * d >= kParallelElems)
    for (std::int64_t b = 0; b < batch; ++b) {
      kernels::axpy(1.0, g.data() + b * d, dx.data() + (b * s + pos) * d, d);
    }
  };
  return outv;
}

Var add_positional(Tape& t, Var x, Var pos) {
  const Tensor& tx = t.value(x);
  const Tensor& tp = t.value(pos);
  if (tx.rank() != 3 || tp.rank() != 2 || tp.dim(0) != tx.dim(1) ||
      tp.dim(1) != tx.dim(2)) {
    throw DimensionError("add_positional: need batch x seq x d plus seq x d, got " +
                         shape_str(tx.shape()) + " and " + shape_str(tp.shape()));
  }
  const std::int64_t batch = tx.dim(0);
  const std::int64_t sd = static_cast<std::int64_t>(tp.size());
  Tensor out(tx.shape());
  const double* px = tx.data();
  const double* pp = tp.data();
  double* po = out.data();
#pragma omp parallel for schedule(static) if (batch * sd >= kParallelElems)
  for (std::int64_t b = 0; b < batch; ++b) {
    const double* in = px + b * sd;
    double* o = po + b * sd;
    for (std::int64_t i = 0; i < sd; ++i) o[i] = in[i] + pp[i];
  }
  const bool rg = t.node(x).requires_grad || t.node(pos).requires_grad;
  Var outv = t.emit(std::move(out), rg);
  if (!rg) return outv;
  t.node(outv).backprop = [&t, x, pos, outv, batch, sd]() {
    const std::vector<double>& g = t.node(outv).grad;
    if (t.node(x).requires_grad) {
      std::vector<double>& dx = t.grad_buf(x);
      kernels::axpy(1.0, g.data(), dx.data(), batch * sd);
    }
    if (t.node(pos).requires_grad) {
      std::vector<double>& dp = t.grad_buf(pos);
      for (std::int64_t b = 0; b < batch; ++b) {  // batch-ascending reduction
        kernels::axpy(1.0, g.data() + b * sd, dp.data(), sd);
      }
    }
  };
  return outv;
}

}  // namespace groklab
