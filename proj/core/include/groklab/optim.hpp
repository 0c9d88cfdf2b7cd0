// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "groklab/model.hpp"
#include "groklab/rng.hpp"

namespace groklab {

enum class OptimKind { sgd, adam, adamw };
const char* to_string(OptimKind k);

struct OptimConfig {
  OptimKind kind = OptimKind::adamw;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;             // never stated by the reference setup
  double weight_decay = 0.0;     // decoupled decay (sgd decay mode / adamw)
  double l2_coeff = 0.0;         // coupled L2 added to the gradient
  int warmup_steps = 0;
  double update_noise_std = 0.0;
  double weight_noise_std = 0.0;
  int batch_size = 0;            // 0 = full batch
  std::uint64_t noise_seed = 0;

  void validate() const;
};

/// Per-parameter Adam moments plus the global step counter; t advances by
/// exactly 1 per optimizer step.
struct OptimState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  std::int64_t t = 0;

  static OptimState for_params(const ModelParams& params, OptimKind kind);
};

/// lr * min(1, t / warmup_steps) with t starting at 1; warmup_steps = 0
/// disables warmup.
double warmup_lr(const OptimConfig& config, std::int64_t t);

// Each step reads gradients from the parameter tensors (ContractError when
// absent) and updates values in place. `noise` feeds the update-direction
// perturbation and may be null when update_noise_std is 0.

/// L2 mode (l2_coeff > 0): theta <- theta - lr_t * (g + l2 * theta).
/// Decay mode (weight_decay > 0): the attenuation coefficient folds into the
/// gradient term the same way, which makes the two modes coincide
/// bit-for-bit at equal coefficients. Setting both is a ConfigError.
void sgd_step(ModelParams& params, OptimState& state, const OptimConfig& config,
              GaussianStream* noise = nullptr);

/// Standard Adam with bias correction; l2_coeff > 0 augments the gradient
/// with l2 * theta before the moment updates (coupled L2).
void adam_step(ModelParams& params, OptimState& state, const OptimConfig& config,
               GaussianStream* noise = nullptr);

/// Adam on the raw gradient plus decoupled decay
/// theta <- theta - lr_t * weight_decay * theta in the same step.
void adamw_step(ModelParams& params, OptimState& state, const OptimConfig& config,
                GaussianStream* noise = nullptr);

/// Dispatch on config.kind.
void optimizer_step(ModelParams& params, OptimState& state,
                    const OptimConfig& config, GaussianStream* noise = nullptr);

/// delta + eps with eps ~ N(0, update_noise_std^2) per coordinate; the
/// caller multiplies by the learning rate once (W <- W + lr * (dW + eps)).
Tensor apply_update_noise(const Tensor& delta, const OptimConfig& config,
                          GaussianStream& rng);

/// Forward-pass view W + weight_noise_std * eps per parameter, fresh draws
/// per call; the optimizer keeps updating the clean parameters.
ModelParams apply_weight_noise(const ModelParams& params,
                               const OptimConfig& config, GaussianStream& rng);

/// The eight optimizer variants of the training-budget comparison, by their
/// stable CLI names: adam-lr-0.3x, adam-baseline, adam-lr-3x,
/// adam-update-noise, adam-weight-noise, adam-minibatch-128, adamw-wd1,
/// adamw-minibatch-128. Unknown names raise ConfigError listing the valid
/// ones.
OptimConfig make_variant(const std::string& name);
const std::vector<std::string>& variant_names();

}  // namespace groklab
