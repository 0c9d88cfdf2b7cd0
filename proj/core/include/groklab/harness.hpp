// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groklab/model.hpp"
#include "groklab/optim.hpp"

namespace groklab {

struct RunConfig {
  ModTask task{97};
  double alpha = 0.3;
  std::uint64_t data_seed = 0;
  std::uint64_t init_seed = 1;
  std::uint64_t noise_seed = 2;
  Encoding encoding = Encoding::simple;
  ModelConfig model;
  OptimConfig optimizer;
  std::int64_t max_steps = 1;
  int eval_every = 10;
  double acc_threshold = 0.99;
  double min_gap_ratio = 5.0;
  std::string out_dir;

  void validate() const;
};

struct MetricRow {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double lr_effective = 0.0;
};

enum class RunSignature { grokked, generalized_without_gap, memorized_only, no_fit };
const char* to_string(RunSignature s);

struct RunSummary {
  std::optional<std::int64_t> memorization_step;
  std::optional<std::int64_t> generalization_step;
  std::optional<double> gap_ratio;  // generalization / max(1, memorization)
  RunSignature signature = RunSignature::no_fit;
  double final_train_acc = 0.0;
  double final_val_acc = 0.0;
  bool diverged = false;
  double wall_time_seconds = 0.0;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Loss and argmax accuracy over an example set; ties in the argmax go to
/// the lowest class index. Never mutates parameters. Large sets are run in
/// chunks, which does not change the arithmetic (per-row losses accumulate
/// in global example order).
EvalResult evaluate(const ModelParams& params, const ModelConfig& config,
                    std::span<const Example> examples, const Encoder& encoder);

enum class Curve { train, val };

/// First row whose chosen accuracy crosses `threshold`; nullopt if never.
std::optional<std::int64_t> detect_event(std::span<const MetricRow> rows,
                                         Curve which, double threshold);

/// grokked: both events with gap_ratio >= min_gap_ratio;
/// generalized-without-gap: both events, smaller ratio;
/// memorized-only: training event only; no-fit otherwise.
RunSignature grokking_signature(const RunSummary& summary,
                                double min_gap_ratio = 5.0);

struct RunResult {
  std::vector<MetricRow> rows;
  RunSummary summary;
  ModelParams params;
};

/// The full training loop: split from (p, alpha, data_seed), init from
/// init_seed, then per step: batch (full set when batch_size = 0), optional
/// weight noise, forward, loss, backward, optimizer step with warmup and
/// optional update noise. Evaluates train and val on clean weights at every
/// multiple of eval_every and at max_steps. A non-finite loss aborts the run
/// with diverged = true.
RunResult run_training(const RunConfig& config);

/// Metrics CSV with exact header
/// `step,train_loss,val_loss,train_acc,val_acc,lr_effective`; floats carry
/// 17 significant digits so read_metrics is the exact inverse.
void write_metrics(std::span<const MetricRow> rows, const std::string& path);
std::vector<MetricRow> read_metrics(const std::string& path);

/// Summary JSON with keys exactly: memorization_step, generalization_step,
/// gap_ratio, signature, final_train_acc, final_val_acc, diverged,
/// wall_time_seconds. Absent events serialize as null.
std::string summary_to_json(const RunSummary& summary);
RunSummary summary_from_json(const std::string& text);
void write_summary(const RunSummary& summary, const std::string& path);

}  // namespace groklab
