// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "groklab/sweep.hpp"

using namespace groklab;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SweepSpec tiny_spec() {
  SweepSpec spec;
  spec.base.p = 5;
  spec.base.model = "mlp";
  spec.base.steps = 20;
  spec.base.eval_every = 10;
  spec.alphas = {0.5, 0.3};  // unsorted on purpose; rows come out sorted
  spec.variants = {"adamw-wd1", "adam-baseline"};
  spec.seeds = {0};
  spec.parallel_workers = 1;
  return spec;
}

}  // namespace

TEST_CASE("run config derives the three seed streams") {
  SweepBase base;
  const RunConfig rc = make_run_config(base, 0.4, "adamw-wd1", 7, "out");
  CHECK(rc.data_seed == 7);
  CHECK(rc.init_seed == 8);
  CHECK(rc.noise_seed == 9);
  CHECK(rc.alpha == 0.4);
  CHECK(rc.optimizer.kind == OptimKind::adamw);
  CHECK(rc.optimizer.noise_seed == 9);
}

TEST_CASE("spec validation rejects bad grids") {
  SweepSpec spec = tiny_spec();
  spec.alphas = {1.5};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = tiny_spec();
  spec.variants = {"adam-warp-drive"};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = tiny_spec();
  spec.seeds.clear();
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("spec file parsing") {
  const std::string text = R"({
    "base": {"p": 7, "encoding": "simple", "model": "mlp", "steps": 50,
             "eval_every": 5},
    "alphas": [0.3, 0.6],
    "variants": ["adam-baseline"],
    "seeds": [0, 1],
    "parallel_workers": 2
  })";
  const SweepSpec spec = parse_sweep_spec(text);
  CHECK(spec.base.p == 7);
  CHECK(spec.base.steps == 50);
  CHECK(spec.alphas.size() == 2);
  CHECK(spec.seeds.size() == 2);
  CHECK(spec.parallel_workers == 2);
  CHECK_THROWS_AS(parse_sweep_spec("{not json"), ParseError);
}

TEST_CASE("sweep produces one sorted row per grid cell") {
  const std::string dir = "test_sweep_out";
  std::filesystem::remove_all(dir);
  const auto rows = run_sweep(tiny_spec(), dir);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].alpha == 0.3);
  CHECK(rows[0].variant == "adam-baseline");
  CHECK(rows[1].alpha == 0.3);
  CHECK(rows[1].variant == "adamw-wd1");
  CHECK(rows[2].alpha == 0.5);
  CHECK(rows[3].alpha == 0.5);
  for (const auto& row : rows) CHECK(row.signature != "error");
  CHECK(std::filesystem::exists(dir + "/sweep.csv"));
  CHECK(std::filesystem::exists(dir + "/alpha0.3__adamw-wd1__seed0/metrics.csv"));
  CHECK(std::filesystem::exists(dir + "/alpha0.5__adam-baseline__seed0/summary.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("rerunning a sweep reproduces sweep.csv byte for byte") {
  const std::string d1 = "test_sweep_a", d2 = "test_sweep_b";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  run_sweep(tiny_spec(), d1);
  run_sweep(tiny_spec(), d2);
  CHECK(slurp(d1 + "/sweep.csv") == slurp(d2 + "/sweep.csv"));
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST_CASE("parallel workers do not change the output") {
  const std::string d1 = "test_sweep_serial", d2 = "test_sweep_par";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  SweepSpec serial = tiny_spec();
  serial.parallel_workers = 1;
  SweepSpec parallel = tiny_spec();
  parallel.parallel_workers = 4;
  run_sweep(serial, d1);
  run_sweep(parallel, d2);
  CHECK(slurp(d1 + "/sweep.csv") == slurp(d2 + "/sweep.csv"));
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST_CASE("sweep csv round trip including absent cells") {
  std::vector<SweepRow> rows(2);
  rows[0].alpha = 0.3;
  rows[0].variant = "adamw-wd1";
  rows[0].seed = 0;
  rows[0].memorization_step = 200;
  rows[0].generalization_step = 9100;
  rows[0].gap_ratio = 45.5;
  rows[0].signature = "grokked";
  rows[0].final_val_acc = 0.999;
  rows[1].alpha = 0.15;
  rows[1].variant = "adam-baseline";
  rows[1].seed = 3;
  rows[1].signature = "error";
  write_sweep_csv(rows, "rt_sweep.csv");
  const auto back = read_sweep_csv("rt_sweep.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].gap_ratio == 45.5);
  CHECK(back[0].generalization_step == 9100);
  CHECK(!back[1].memorization_step.has_value());
  CHECK(back[1].signature == "error");
  std::filesystem::remove("rt_sweep.csv");
}

TEST_CASE("report medians and >max_steps cells") {
  std::vector<SweepRow> rows;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SweepRow r;
    r.alpha = 0.3;
    r.variant = "adamw-wd1";
    r.seed = seed;
    r.generalization_step = seed == 0 ? 100 : (seed == 1 ? 200 : 400);
    r.signature = "grokked";
    r.final_val_acc = 0.9 + 0.01 * static_cast<double>(seed);
    rows.push_back(r);
  }
  SweepRow never;
  never.alpha = 0.15;
  never.variant = "adamw-wd1";
  never.seed = 0;
  never.signature = "memorized-only";
  never.final_val_acc = 0.05;
  rows.push_back(never);

  const auto entries = make_report(rows);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].alpha == 0.15);
  CHECK(!entries[0].median_generalization_step.has_value());  // ">max_steps"
  CHECK(entries[1].alpha == 0.3);
  CHECK(*entries[1].median_generalization_step == 200.0);  // median of {100,200,400}
  CHECK(*entries[1].median_final_val_acc == 0.91);

  write_report_csv(entries, "rt_report.csv");
  const std::string text = slurp("rt_report.csv");
  CHECK(text.find(">max_steps") != std::string::npos);
  std::filesystem::remove("rt_report.csv");

  const std::string tables = format_report_tables(entries);
  CHECK(tables.find("steps until generalization") != std::string::npos);
  CHECK(tables.find(">max_steps") != std::string::npos);
  CHECK(tables.find("final validation accuracy") != std::string::npos);
}

TEST_CASE("single-row report") {
  std::vector<SweepRow> rows(1);
  rows[0].alpha = 0.5;
  rows[0].variant = "adam-baseline";
  rows[0].generalization_step = 123;
  rows[0].signature = "generalized-without-gap";
  rows[0].final_val_acc = 1.0;
  const auto entries = make_report(rows);
  REQUIRE(entries.size() == 1);
  CHECK(*entries[0].median_generalization_step == 123.0);
}
