// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace groklab {

double finite_diff_check(const ScalarFn& f, const Tensor& x, double h) {
  if (!(h > 0.0) || h > 1e-2) {
    throw DomainError("finite_diff_check: h must be in (0, 1e-2], got " +
                      std::to_string(h));
  }
  Tensor probe = x;
  std::vector<double> analytic;
  {
    Tape tape;
    Var vx = tape.leaf(probe);
    Var loss = f(tape, vx);
    tape.backward(loss);
    analytic = probe.grad();
  }
  auto eval_at = [&f](const Tensor& point) {
    Tape tape;
    Tensor local = point;
    Var vx = tape.leaf(local);
    Var loss = f(tape, vx);
    return tape.value(loss).at(0);
  };
  double max_rel = 0.0;
  Tensor shifted = x;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double orig = shifted.at(static_cast<int>(i));
    shifted.at(static_cast<int>(i)) = orig + h;
    const double fp = eval_at(shifted);
    shifted.at(static_cast<int>(i)) = orig - h;
    const double fm = eval_at(shifted);
    shifted.at(static_cast<int>(i)) = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[static_cast<std::size_t>(i)];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
  }
  return max_rel;
}

double model_gradient_check(const ModelConfig& config, const ModelParams& params,
                            const Batch& batch, double h) {
  double worst = 0.0;
  for (const auto& [path, tensor] : params.tensors()) {
    const std::string& target = path;
    ScalarFn f = [&config, &params, &batch, &target](Tape& tape, Var vx) {
      ParamBinder binder(tape, params, target, vx);
      Var logits = forward_model(tape, config, binder, batch);
      return cross_entropy(tape, logits, batch.targets);
    };
    worst = std::max(worst, finite_diff_check(f, tensor, h));
  }
  return worst;
}

}  // namespace groklab
