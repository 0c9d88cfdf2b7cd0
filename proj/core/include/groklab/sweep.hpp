// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "groklab/harness.hpp"

namespace groklab {

/// Everything a sweep run shares: the base run settings that the grid axes
/// (alpha, optimizer variant, seed) are substituted into.
struct SweepBase {
  int p = 97;
  Encoding encoding = Encoding::simple;
  std::string model = "transformer-simplified";
  std::int64_t steps = 1800;
  int eval_every = 10;
  double acc_threshold = 0.99;
  double min_gap_ratio = 5.0;
  double init_scale = 1.0;
  bool layer_norm = true;
  Positional positional = Positional::learned;
};

struct SweepSpec {
  SweepBase base;
  std::vector<double> alphas;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;
  int parallel_workers = 1;

  void validate() const;
};

/// JSON spec file with keys {base, alphas, variants, seeds,
/// parallel_workers}.
SweepSpec parse_sweep_spec(const std::string& json_text);
SweepSpec load_sweep_spec(const std::string& path);

struct SweepRow {
  double alpha = 0.0;
  std::string variant;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> memorization_step;
  std::optional<std::int64_t> generalization_step;
  std::optional<double> gap_ratio;
  std::string signature;  // run signature, or "error" for failed workers
  std::optional<double> final_val_acc;
};

/// Model construction from the CLI-facing name: transformer,
/// transformer-simplified, mlp, lstm. Vocabulary, sequence length and
/// output width come from the encoding.
ModelConfig make_model_config(const std::string& name, Encoding encoding, int p,
                              double init_scale = 1.0, bool layer_norm = true,
                              Positional positional = Positional::learned);

/// Builds the model/optimizer for one grid cell; seed derivation is
/// data = seed, init = seed + 1, noise = seed + 2.
RunConfig make_run_config(const SweepBase& base, double alpha,
                          const std::string& variant, std::uint64_t seed,
                          const std::string& out_dir);

/// Runs the full grid, one subdirectory per (alpha, variant, seed), with up
/// to `parallel_workers` concurrent runs. Rows come back sorted by (alpha,
/// variant, seed) regardless of completion order; failed runs carry
/// signature "error". Writes `sweep.csv` under out_dir.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, const std::string& out_dir);

/// sweep.csv with header
/// `alpha,variant,seed,memorization_step,generalization_step,gap_ratio,signature,final_val_acc`;
/// absent optionals are empty cells.
void write_sweep_csv(std::span<const SweepRow> rows, const std::string& path);
std::vector<SweepRow> read_sweep_csv(const std::string& path);

/// Aggregates for the two report tables: median steps-until-generalization
/// per (alpha, variant) and median final validation accuracy. Absent
/// generalization counts as +inf; a median that lands on it prints as
/// ">max_steps".
struct ReportEntry {
  double alpha = 0.0;
  std::string variant;
  std::optional<double> median_generalization_step;  // nullopt = ">max_steps"
  std::optional<double> median_final_val_acc;        // nullopt = no data
};

std::vector<ReportEntry> make_report(std::span<const SweepRow> rows);
void write_report_csv(std::span<const ReportEntry> entries, const std::string& path);
/// The two aligned plain-text tables (steps until generalization; final
/// validation accuracy).
std::string format_report_tables(std::span<const ReportEntry> entries);

}  // namespace groklab
