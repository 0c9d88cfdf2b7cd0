// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace groklab {

void RunConfig::validate() const {
  if (task.p < 2) throw ConfigError("run: p must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("run: alpha must lie in (0, 1)");
  if (max_steps < 1) throw ConfigError("run: max_steps must be >= 1");
  if (eval_every < 1) throw ConfigError("run: eval_every must be >= 1");
  if (!(acc_threshold > 0.0 && acc_threshold <= 1.0)) {
    throw ConfigError("run: acc_threshold must lie in (0, 1]");
  }
  optimizer.validate();
}

const char* to_string(RunSignature s) {
  switch (s) {
    case RunSignature::grokked: return "grokked";
    case RunSignature::generalized_without_gap: return "generalized-without-gap";
    case RunSignature::memorized_only: return "memorized-only";
    case RunSignature::no_fit: return "no-fit";
  }
  return "?";
}

namespace {

RunSignature signature_from_string(const std::string& s) {
  if (s == "grokked") return RunSignature::grokked;
  if (s == "generalized-without-gap") return RunSignature::generalized_without_gap;
  if (s == "memorized-only") return RunSignature::memorized_only;
  if (s == "no-fit") return RunSignature::no_fit;
  throw ParseError("unknown signature \"" + s + "\"");
}

constexpr int kEvalChunk = 4096;

}  // namespace

EvalResult evaluate(const ModelParams& params, const ModelConfig& config,
                    std::span<const Example> examples, const Encoder& encoder) {
  if (examples.empty()) throw ContractError("evaluate: empty example list");
  double loss_sum = 0.0;
  std::int64_t correct = 0;
  // Chunked to bound tape memory; per-row losses accumulate in global
  // example order, so the chunk size never changes the result.
  for (std::size_t start = 0; start < examples.size(); start += kEvalChunk) {
    const std::size_t stop = std::min(examples.size(), start + kEvalChunk);
    const Batch batch = encoder.encode(examples.subspan(start, stop - start));
    Tape tape;
    ParamBinder binder(tape, params);  // frozen binding; params stay const
    Var logits_var = forward_model(tape, config, binder, batch);
    const Tensor& logits = tape.value(logits_var);
    const int c = logits.dim(1);
    for (int i = 0; i < batch.batch; ++i) {
      const double* z = logits.data() + static_cast<std::int64_t>(i) * c;
      double mx = z[0];
      int argmax = 0;
      for (int j = 1; j < c; ++j) {
        if (z[j] > mx) {  // strict: ties keep the lowest class index
          mx = z[j];
          argmax = j;
        }
      }
      double s = 0.0;
      for (int j = 0; j < c; ++j) s += std::exp(z[j] - mx);
      loss_sum += mx + std::log(s) - z[batch.targets[static_cast<std::size_t>(i)]];
      if (argmax == batch.targets[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  const double n = static_cast<double>(examples.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

std::optional<std::int64_t> detect_event(std::span<const MetricRow> rows, Curve which,
                                         double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw DomainError("detect_event: threshold must lie in (0, 1]");
  }
  for (const MetricRow& row : rows) {
    const double acc = which == Curve::train ? row.train_acc : row.val_acc;
    if (acc >= threshold) return row.step;  // first crossing
  }
  return std::nullopt;
}

RunSignature grokking_signature(const RunSummary& summary, double min_gap_ratio) {
  const bool mem = summary.memorization_step.has_value();
  const bool gen = summary.generalization_step.has_value();
  if (mem && gen) {
    const double ratio = static_cast<double>(*summary.generalization_step) /
                         static_cast<double>(std::max<std::int64_t>(1, *summary.memorization_step));
    return ratio >= min_gap_ratio ? RunSignature::grokked
                                  : RunSignature::generalized_without_gap;
  }
  if (mem) return RunSignature::memorized_only;
  return RunSignature::no_fit;
}

RunResult run_training(const RunConfig& config) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();

  const Split split = split_dataset(config.task, config.alpha, config.data_seed);
  const Encoder encoder(config.encoding, config.task);
  ModelParams params = init_params(config.model, config.init_seed);
  OptimState state = OptimState::for_params(params, config.optimizer.kind);
  GaussianStream noise(config.noise_seed);

  // Minibatch sampling: reshuffle the train indices each epoch, partition
  // sequentially, keep the short final batch. The shuffle stream is separate
  // from the split stream so batching never perturbs the split itself.
  SplitMix64 batch_rng(config.data_seed ^ 0x8d21c2f4d1e8b5a3ull);
  std::vector<std::uint32_t> order(split.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  std::size_t cursor = order.size();  // forces a shuffle before the first batch
  std::vector<Example> batch_examples;

  const int batch_size = config.optimizer.batch_size;
  const bool full_batch = batch_size == 0;
  Batch full_train_batch;
  if (full_batch) full_train_batch = encoder.encode(split.train);

  std::vector<MetricRow> rows;
  bool diverged = false;

  for (std::int64_t step = 1; step <= config.max_steps; ++step) {
    const Batch* batch = nullptr;
    Batch minibatch;
    if (full_batch) {
      batch = &full_train_batch;
    } else {
      batch_examples.clear();
      const std::size_t want = std::min<std::size_t>(
          static_cast<std::size_t>(batch_size), split.train.size());
      if (cursor >= order.size()) {
        fisher_yates(order, batch_rng);
        cursor = 0;
      }
      const std::size_t stop = std::min(order.size(), cursor + want);
      for (; cursor < stop; ++cursor) batch_examples.push_back(split.train[order[cursor]]);
      minibatch = encoder.encode(batch_examples);
      batch = &minibatch;
    }

    const bool weight_noise = config.optimizer.weight_noise_std > 0.0;
    double loss_value = 0.0;
    {
      // Perturbed view for forward/backward only; the optimizer updates the
      // clean parameters with the gradients taken at the perturbed point.
      ModelParams* active = &params;
      ModelParams perturbed;
      if (weight_noise) {
        perturbed = apply_weight_noise(params, config.optimizer, noise);
        active = &perturbed;
      }
      Tape tape;
      ParamBinder binder(tape, *active);
      Var logits = forward_model(tape, config.model, binder, *batch);
      Var loss = cross_entropy(tape, logits, batch->targets);
      loss_value = tape.value(loss).at(0);
      if (!std::isfinite(loss_value)) {
        diverged = true;
      } else {
        tape.backward(loss);
        if (weight_noise) {
          for (auto& [path, tensor] : params.tensors()) {
            tensor.ensure_grad();
            tensor.grad() = perturbed.at(path).grad();
          }
        }
        optimizer_step(params, state, config.optimizer, &noise);
      }
    }
    if (diverged) break;

    if (step % config.eval_every == 0 || step == config.max_steps) {
      const EvalResult train_eval = evaluate(params, config.model, split.train, encoder);
      const EvalResult val_eval = evaluate(params, config.model, split.val, encoder);
      rows.push_back({step, train_eval.loss, val_eval.loss, train_eval.accuracy,
                      val_eval.accuracy, warmup_lr(config.optimizer, step)});
    }
  }

  RunSummary summary;
  summary.memorization_step = detect_event(rows, Curve::train, config.acc_threshold);
  summary.generalization_step = detect_event(rows, Curve::val, config.acc_threshold);
  if (summary.memorization_step && summary.generalization_step) {
    summary.gap_ratio =
        static_cast<double>(*summary.generalization_step) /
        static_cast<double>(std::max<std::int64_t>(1, *summary.memorization_step));
  }
  summary.signature = grokking_signature(summary, config.min_gap_ratio);
  if (!rows.empty()) {
    summary.final_train_acc = rows.back().train_acc;
    summary.final_val_acc = rows.back().val_acc;
  }
  summary.diverged = diverged;
  summary.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(rows), std::move(summary), std::move(params)};
}

// ----------------------------------------------------------------------
// metrics CSV

namespace {

constexpr const char* kMetricsHeader =
    "step,train_loss,val_loss,train_acc,val_acc,lr_effective";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw ParseError("metrics line " + std::to_string(line_no) + ": bad float \"" +
                     tok + "\"");
  }
  return v;
}

}  // namespace

void write_metrics(std::span<const MetricRow> rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << kMetricsHeader << '\n';
  for (const MetricRow& r : rows) {
    out << r.step << ',' << fmt_double(r.train_loss) << ',' << fmt_double(r.val_loss)
        << ',' << fmt_double(r.train_acc) << ',' << fmt_double(r.val_acc) << ','
        << fmt_double(r.lr_effective) << '\n';
  }
}

std::vector<MetricRow> read_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ParseError("metrics line 1: expected header \"" +
                     std::string(kMetricsHeader) + "\"");
  }
  std::vector<MetricRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos
                                             ? std::string::npos
                                             : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 6) {
      throw ParseError("metrics line " + std::to_string(line_no) + ": expected 6 cells, got " +
                       std::to_string(cells.size()));
    }
    MetricRow r;
    try {
      r.step = std::stoll(cells[0]);
    } catch (const std::exception&) {
      throw ParseError("metrics line " + std::to_string(line_no) + ": bad step \"" +
                       cells[0] + "\"");
    }
    r.train_loss = parse_double(cells[1], line_no);
    r.val_loss = parse_double(cells[2], line_no);
    r.train_acc = parse_double(cells[3], line_no);
    r.val_acc = parse_double(cells[4], line_no);
    r.lr_effective = parse_double(cells[5], line_no);
    rows.push_back(r);
  }
  return rows;
}

// ----------------------------------------------------------------------
// summary JSON

std::string summary_to_json(const RunSummary& summary) {
  nlohmann::ordered_json j;
  j["memorization_step"] =
      summary.memorization_step ? nlohmann::json(*summary.memorization_step)
                                : nlohmann::json(nullptr);
  j["generalization_step"] =
      summary.generalization_step ? nlohmann::json(*summary.generalization_step)
                                  : nlohmann::json(nullptr);
  j["gap_ratio"] = summary.gap_ratio ? nlohmann::json(*summary.gap_ratio)
                                     : nlohmann::json(nullptr);
  j["signature"] = to_string(summary.signature);
  j["final_train_acc"] = summary.final_train_acc;
  j["final_val_acc"] = summary.final_val_acc;
  j["diverged"] = summary.diverged;
  j["wall_time_seconds"] = summary.wall_time_seconds;
  return j.dump(2) + "\n";
}

RunSummary summary_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("summary: bad JSON: ") + e.what());
  }
  RunSummary s;
  if (!j.at("memorization_step").is_null()) {
    s.memorization_step = j.at("memorization_step").get<std::int64_t>();
  }
  if (!j.at("generalization_step").is_null()) {
    s.generalization_step = j.at("generalization_step").get<std::int64_t>();
  }
  if (!j.at("gap_ratio").is_null()) s.gap_ratio = j.at("gap_ratio").get<double>();
  s.signature = signature_from_string(j.at("signature").get<std::string>());
  s.final_train_acc = j.at("final_train_acc").get<double>();
  s.final_val_acc = j.at("final_val_acc").get<double>();
  s.diverged = j.at("diverged").get<bool>();
  s.wall_time_seconds = j.at("wall_time_seconds").get<double>();
  return s;
}

void write_summary(const RunSummary& summary, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << summary_to_json(summary);
}

}  // namespace groklab
