// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
//
// groklab: train/sweep/report/check for modular-addition generalization
// experiments. All outputs are deterministic data files; see README.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "groklab/harness.hpp"
#include "groklab/selfcheck.hpp"
#include "groklab/sweep.hpp"

namespace {

using namespace groklab;

struct TrainArgs {
  int p = 97;
  double alpha = 0.3;
  std::string encoding = "simple";
  std::string model = "transformer-simplified";
  std::string optimizer = "adamw-wd1";
  std::int64_t steps = 0;
  int eval_every = 10;
  std::uint64_t seed = 0;
  double acc_threshold = 0.99;
  double min_gap_ratio = 5.0;
  double init_scale = 1.0;
  bool no_layer_norm = false;
  std::string positional = "learned";
  int batch_size = -1;  // -1 keeps the variant's own batch size
  std::string out = "run-out";
  std::string dump_dataset;
};

int cmd_train(const TrainArgs& args) {
  SweepBase base;
  base.p = args.p;
  base.encoding = args.encoding == "dictionary" ? Encoding::dictionary : Encoding::simple;
  base.model = args.model;
  base.steps = args.steps;
  base.eval_every = args.eval_every;
  base.acc_threshold = args.acc_threshold;
  base.min_gap_ratio = args.min_gap_ratio;
  base.init_scale = args.init_scale;
  base.layer_norm = !args.no_layer_norm;
  base.positional = args.positional == "sinusoidal" ? Positional::sinusoidal
                                                    : Positional::learned;
  RunConfig config = make_run_config(base, args.alpha, args.optimizer, args.seed, args.out);
  if (args.batch_size >= 0) config.optimizer.batch_size = args.batch_size;

  std::filesystem::create_directories(args.out);
  if (!args.dump_dataset.empty()) {
    write_dataset_csv(split_dataset(config.task, config.alpha, config.data_seed),
                      args.dump_dataset);
  }

  {
    const ModelParams preview = init_params(config.model, config.init_seed);
    std::fprintf(stderr, "model %s: %lld parameters (%lld non-embedding)\n",
                 args.model.c_str(),
                 static_cast<long long>(count_params(preview, true)),
                 static_cast<long long>(count_params(preview, false)));
  }

  RunResult result = run_training(config);
  write_metrics(result.rows, args.out + "/metrics.csv");
  write_summary(result.summary, args.out + "/summary.json");
  save_checkpoint(args.out + "/checkpoint.grok", config.model, result.params);
  std::cout << summary_to_json(result.summary);
  return result.summary.diverged ? 2 : 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out_dir) {
  SweepSpec spec = load_sweep_spec(spec_path);
  if (const char* env = std::getenv("GROKLAB_WORKERS")) {
    spec.parallel_workers = std::max(1, std::atoi(env));
  }
  const std::vector<SweepRow> rows = run_sweep(spec, out_dir);
  std::size_t ok = 0;
  for (const SweepRow& r : rows) {
    if (r.signature != "error") ++ok;
  }
  std::fprintf(stderr, "sweep: %zu/%zu runs succeeded -> %s/sweep.csv\n", ok,
               rows.size(), out_dir.c_str());
  return ok > 0 ? 0 : 1;
}

int cmd_report(const std::string& csv_path, const std::string& out_path) {
  const std::vector<SweepRow> rows = read_sweep_csv(csv_path);
  if (rows.empty()) {
    std::fprintf(stderr, "report: %s has no data rows\n", csv_path.c_str());
    return 1;
  }
  const std::vector<ReportEntry> entries = make_report(rows);
  write_report_csv(entries, out_path);
  std::cout << format_report_tables(entries);
  return 0;
}

int cmd_check() {
  const std::vector<CheckResult> results = run_selfchecks();
  bool all = true;
  for (const CheckResult& r : results) {
    std::printf("[%s] %-40s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
    all = all && r.pass;
  }
  std::printf("%zu checks, %s\n", results.size(), all ? "all passed" : "FAILURES");
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"groklab: modular-addition generalization experiments"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "run one training job");
  train->add_option("--p", train_args.p, "prime modulus")->capture_default_str();
  train->add_option("--alpha", train_args.alpha, "training data fraction in (0,1)")
      ->required();
  train->add_option("--encoding", train_args.encoding, "simple|dictionary")
      ->check(CLI::IsMember({"simple", "dictionary"}))
      ->capture_default_str();
  train->add_option("--model", train_args.model,
                    "transformer|transformer-simplified|mlp|lstm")
      ->capture_default_str();
  train->add_option("--optimizer", train_args.optimizer, "optimizer variant name")
      ->capture_default_str();
  train->add_option("--steps", train_args.steps, "optimization budget")->required();
  train->add_option("--eval-every", train_args.eval_every, "evaluation cadence")
      ->capture_default_str();
  train->add_option("--seed", train_args.seed,
                    "base seed (data=seed, init=seed+1, noise=seed+2)")
      ->capture_default_str();
  train->add_option("--acc-threshold", train_args.acc_threshold,
                    "event-detection accuracy threshold")
      ->capture_default_str();
  train->add_option("--min-gap-ratio", train_args.min_gap_ratio,
                    "grokking signature gap threshold")
      ->capture_default_str();
  train->add_option("--init-scale", train_args.init_scale, "initialization scale")
      ->capture_default_str();
  train->add_flag("--no-layer-norm", train_args.no_layer_norm,
                  "disable transformer layer norm");
  train->add_option("--positional", train_args.positional, "learned|sinusoidal")
      ->check(CLI::IsMember({"learned", "sinusoidal"}))
      ->capture_default_str();
  train->add_option("--batch-size", train_args.batch_size,
                    "override variant batch size (0 = full batch)");
  train->add_option("--out", train_args.out, "output directory")->capture_default_str();
  train->add_option("--dump-dataset", train_args.dump_dataset,
                    "also write the split as x,y,label,split CSV");

  std::string sweep_spec;
  std::string sweep_out = "sweep-out";
  CLI::App* sweep = app.add_subcommand("sweep", "run an alpha x variant x seed grid");
  sweep->add_option("spec", sweep_spec, "sweep spec JSON file")->required();
  sweep->add_option("--out", sweep_out, "output directory")->capture_default_str();

  std::string report_csv;
  std::string report_out = "report.csv";
  CLI::App* report = app.add_subcommand("report", "aggregate a sweep.csv");
  report->add_option("sweep_csv", report_csv, "sweep.csv produced by sweep")->required();
  report->add_option("--out", report_out, "report CSV path")->capture_default_str();

  CLI::App* check = app.add_subcommand("check", "run the oracle self-check suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (sweep->parsed()) return cmd_sweep(sweep_spec, sweep_out);
    if (report->parsed()) return cmd_report(report_csv, report_out);
    if (check->parsed()) return cmd_check();
  } catch (const groklab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
