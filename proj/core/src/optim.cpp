// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/optim.hpp"

#include <cmath>

namespace groklab {

const char* to_string(OptimKind k) {
  switch (k) {
    case OptimKind::sgd: return "sgd";
    case OptimKind::adam: return "adam";
    case OptimKind::adamw: return "adamw";
  }
  return "?";
}

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("optimizer: lr must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("optimizer: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be > 0");
  if (weight_decay < 0.0 || l2_coeff < 0.0) {
    throw ConfigError("optimizer: decay coefficients must be >= 0");
  }
  if (update_noise_std < 0.0 || weight_noise_std < 0.0) {
    throw ConfigError("optimizer: noise stds must be >= 0");
  }
  if (warmup_steps < 0) throw ConfigError("optimizer: warmup_steps must be >= 0");
  if (batch_size < 0) throw ConfigError("optimizer: batch_size must be >= 0");
}

OptimState OptimState::for_params(const ModelParams& params, OptimKind kind) {
  OptimState state;
  if (kind != OptimKind::sgd) {
    for (const auto& [path, tensor] : params.tensors()) {
      state.m.emplace(path, Tensor(tensor.shape()));
      state.v.emplace(path, Tensor(tensor.shape()));
    }
  }
  return state;
}

double warmup_lr(const OptimConfig& config, std::int64_t t) {
  if (t < 1) throw ContractError("warmup_lr: step index starts at 1");
  if (config.warmup_steps <= 0 || t >= config.warmup_steps) return config.lr;
  return config.lr * (static_cast<double>(t) / config.warmup_steps);
}

namespace {

std::int64_t advance_step(OptimState& state) {
  if (state.t >= (std::int64_t{1} << 53)) {
    throw ContractError("optimizer: step counter exceeds 2^53");
  }
  return ++state.t;
}

const std::vector<double>& grad_of(const Tensor& tensor, const std::string& path) {
  if (!tensor.has_grad()) {
    throw ContractError("optimizer: gradient missing for parameter " + path);
  }
  return tensor.grad();
}

}  // namespace

void sgd_step(ModelParams& params, OptimState& state, const OptimConfig& config,
              GaussianStream* noise) {
  config.validate();
  if (config.l2_coeff > 0.0 && config.weight_decay > 0.0) {
    throw ConfigError("sgd: l2_coeff and weight_decay are exclusive modes");
  }
  const std::int64_t t = advance_step(state);
  const double lr_t = warmup_lr(config, t);
  // Both modes attenuate through the same arithmetic, so at equal
  // coefficients the trajectories coincide bit-for-bit.
  const double coeff = config.l2_coeff > 0.0 ? config.l2_coeff : config.weight_decay;
  const bool noisy = config.update_noise_std > 0.0;
  if (noisy && noise == nullptr) {
    throw ContractError("optimizer: update noise requested without a noise stream");
  }
  for (auto& [path, tensor] : params.tensors()) {
    const std::vector<double>& g = grad_of(tensor, path);
    std::vector<double>& w = tensor.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      double delta = -(g[i] + coeff * w[i]);
      if (noisy) delta += config.update_noise_std * noise->next();
      w[i] += lr_t * delta;
    }
  }
}

namespace {

void adam_family_step(ModelParams& params, OptimState& state,
                      const OptimConfig& config, GaussianStream* noise,
                      bool decoupled_decay) {
  config.validate();
  const std::int64_t t = advance_step(state);
  const double lr_t = warmup_lr(config, t);
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  const bool noisy = config.update_noise_std > 0.0;
  if (noisy && noise == nullptr) {
    throw ContractError("optimizer: update noise requested without a noise stream");
  }
  for (auto& [path, tensor] : params.tensors()) {
    const std::vector<double>& g = grad_of(tensor, path);
    std::vector<double>& w = tensor.values();
    std::vector<double>& m = state.m.at(path).values();
    std::vector<double>& v = state.v.at(path).values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      // Coupled L2 folds into the gradient before the moment updates.
      const double gi = decoupled_decay ? g[i] : g[i] + config.l2_coeff * w[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      double delta = -m_hat / (std::sqrt(v_hat) + config.eps);
      if (noisy) delta += config.update_noise_std * noise->next();
      w[i] += lr_t * delta;
      if (decoupled_decay) w[i] -= lr_t * config.weight_decay * w[i];
    }
  }
}

}  // namespace

void adam_step(ModelParams& params, OptimState& state, const OptimConfig& config,
               GaussianStream* noise) {
  adam_family_step(params, state, config, noise, /*decoupled_decay=*/false);
}

void adamw_step(ModelParams& params, OptimState& state, const OptimConfig& config,
                GaussianStream* noise) {
  adam_family_step(params, state, config, noise, /*decoupled_decay=*/true);
}

void optimizer_step(ModelParams& params, OptimState& state,
                    const OptimConfig& config, GaussianStream* noise) {
  switch (config.kind) {
    case OptimKind::sgd: sgd_step(params, state, config, noise); break;
    case OptimKind::adam: adam_step(params, state, config, noise); break;
    case OptimKind::adamw: adamw_step(params, state, config, noise); break;
  }
}

Tensor apply_update_noise(const Tensor& delta, const OptimConfig& config,
                          GaussianStream& rng) {
  Tensor out = delta;
  if (config.update_noise_std == 0.0) return out;  // no draws, exact identity
  for (auto& v : out.values()) v += config.update_noise_std * rng.next();
  return out;
}

ModelParams apply_weight_noise(const ModelParams& params, const OptimConfig& config,
                               GaussianStream& rng) {
  ModelParams out = params;
  if (config.weight_noise_std == 0.0) return out;
  for (auto& [path, tensor] : out.tensors()) {  // sorted-path draw order
    for (auto& v : tensor.values()) v += config.weight_noise_std * rng.next();
  }
  return out;
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {
      "adam-lr-0.3x",      "adam-baseline",     "adam-lr-3x",
      "adam-update-noise", "adam-weight-noise", "adam-minibatch-128",
      "adamw-wd1",         "adamw-minibatch-128"};
  return names;
}

OptimConfig make_variant(const std::string& name) {
  OptimConfig c;  // shared: betas (0.9, 0.98), warmup 10, full batch
  c.kind = OptimKind::adam;
  c.lr = 1e-3;
  c.warmup_steps = 10;
  if (name == "adam-lr-0.3x") {
    c.lr = 3e-4;
  } else if (name == "adam-baseline") {
    // exactly the shared baseline
  } else if (name == "adam-lr-3x") {
    c.lr = 3e-3;
  } else if (name == "adam-update-noise") {
    c.update_noise_std = 1.0;  // unit Gaussian on the update direction
  } else if (name == "adam-weight-noise") {
    c.weight_noise_std = 0.01;
  } else if (name == "adam-minibatch-128") {
    c.batch_size = 128;
  } else if (name == "adamw-wd1") {
    c.kind = OptimKind::adamw;
    c.weight_decay = 1.0;
  } else if (name == "adamw-minibatch-128") {
    c.kind = OptimKind::adamw;
    c.weight_decay = 1.0;
    c.batch_size = 128;
  } else {
    std::string valid;
    for (const auto& v : variant_names()) {
      if (!valid.empty()) valid += ", ";
      valid += v;
    }
    throw ConfigError("unknown optimizer variant \"" + name + "\"; valid names: " + valid);
  }
  return c;
}

}  // namespace groklab
