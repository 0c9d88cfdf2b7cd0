// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace groklab {

namespace {

std::string fmt_alpha(double a) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", a);
  return buf;
}

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Positional positional_from_string(const std::string& s) {
  if (s == "learned") return Positional::learned;
  if (s == "sinusoidal") return Positional::sinusoidal;
  throw ConfigError("unknown positional encoding \"" + s + "\"");
}

Encoding encoding_from_string(const std::string& s) {
  if (s == "simple") return Encoding::simple;
  if (s == "dictionary") return Encoding::dictionary;
  throw ConfigError("unknown encoding \"" + s + "\"");
}

}  // namespace

void SweepSpec::validate() const {
  if (alphas.empty()) throw ConfigError("sweep: alphas must be nonempty");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw ConfigError("sweep: alpha " + std::to_string(a) + " outside (0, 1)");
    }
  }
  if (variants.empty()) throw ConfigError("sweep: variants must be nonempty");
  for (const auto& v : variants) make_variant(v);  // throws on unknown names
  if (seeds.empty()) throw ConfigError("sweep: seeds must be nonempty");
  if (parallel_workers < 1) throw ConfigError("sweep: parallel_workers must be >= 1");
}

SweepSpec parse_sweep_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sweep spec: bad JSON: ") + e.what());
  }
  SweepSpec spec;
  const nlohmann::json& base = j.at("base");
  spec.base.p = base.value("p", 97);
  spec.base.encoding = encoding_from_string(base.value("encoding", std::string("simple")));
  spec.base.model = base.value("model", std::string("transformer-simplified"));
  spec.base.steps = base.value("steps", std::int64_t{1800});
  spec.base.eval_every = base.value("eval_every", 10);
  spec.base.acc_threshold = base.value("acc_threshold", 0.99);
  spec.base.min_gap_ratio = base.value("min_gap_ratio", 5.0);
  spec.base.init_scale = base.value("init_scale", 1.0);
  spec.base.layer_norm = base.value("layer_norm", true);
  spec.base.positional =
      positional_from_string(base.value("positional", std::string("learned")));
  spec.alphas = j.at("alphas").get<std::vector<double>>();
  spec.variants = j.at("variants").get<std::vector<std::string>>();
  spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  spec.parallel_workers = j.value("parallel_workers", 1);
  spec.validate();
  return spec;
}

SweepSpec load_sweep_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sweep_spec(ss.str());
}

ModelConfig make_model_config(const std::string& name, Encoding encoding, int p,
                              double init_scale, bool layer_norm,
                              Positional positional) {
  const Encoder encoder(encoding, ModTask{p});
  const int vocab = encoder.vocab_size();
  const int seq = encoder.seq_len();
  const int outputs = encoder.n_outputs();
  if (name == "transformer" || name == "transformer-simplified") {
    TransformerConfig c = name == "transformer"
                              ? TransformerConfig::full(vocab, seq, outputs)
                              : TransformerConfig::simplified(vocab, seq, outputs);
    c.use_layer_norm = layer_norm;
    c.positional = positional;
    c.init_scale = init_scale;
    return c;
  }
  if (name == "mlp") {
    if (encoding != Encoding::simple) {
      throw ConfigError("mlp supports the simple encoding only");
    }
    MLPConfig c;
    c.vocab_size = vocab;
    c.n_outputs = outputs;
    c.init_scale = init_scale;
    c.validate();
    return c;
  }
  if (name == "lstm") {
    LSTMConfig c;
    c.vocab_size = vocab;
    c.n_outputs = outputs;
    c.init_scale = init_scale;
    c.validate();
    return c;
  }
  throw ConfigError("unknown model \"" + name +
                    "\"; valid: transformer, transformer-simplified, mlp, lstm");
}

RunConfig make_run_config(const SweepBase& base, double alpha,
                          const std::string& variant, std::uint64_t seed,
                          const std::string& out_dir) {
  RunConfig rc;
  rc.task.p = base.p;
  rc.alpha = alpha;
  // Seed derivation shared with the CLI: data, init, noise streams.
  rc.data_seed = seed;
  rc.init_seed = seed + 1;
  rc.noise_seed = seed + 2;
  rc.encoding = base.encoding;
  rc.model = make_model_config(base.model, base.encoding, base.p, base.init_scale,
                               base.layer_norm, base.positional);
  rc.optimizer = make_variant(variant);
  rc.optimizer.noise_seed = rc.noise_seed;
  rc.max_steps = base.steps;
  rc.eval_every = base.eval_every;
  rc.acc_threshold = base.acc_threshold;
  rc.min_gap_ratio = base.min_gap_ratio;
  rc.out_dir = out_dir;
  return rc;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const std::string& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  struct Task {
    double alpha;
    std::string variant;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (double a : spec.alphas) {
    for (const auto& v : spec.variants) {
      for (std::uint64_t s : spec.seeds) tasks.push_back({a, v, s});
    }
  }
  // Fixed row order regardless of completion order or worker count.
  std::sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) {
    if (a.alpha != b.alpha) return a.alpha < b.alpha;
    if (a.variant != b.variant) return a.variant < b.variant;
    return a.seed < b.seed;
  });

  std::vector<SweepRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      SweepRow row;
      row.alpha = task.alpha;
      row.variant = task.variant;
      row.seed = task.seed;
      const std::string run_dir = out_dir + "/alpha" + fmt_alpha(task.alpha) + "__" +
                                  task.variant + "__seed" + std::to_string(task.seed);
      try {
        fs::create_directories(run_dir);
        const RunConfig rc =
            make_run_config(spec.base, task.alpha, task.variant, task.seed, run_dir);
        RunResult result = run_training(rc);
        write_metrics(result.rows, run_dir + "/metrics.csv");
        write_summary(result.summary, run_dir + "/summary.json");
        row.memorization_step = result.summary.memorization_step;
        row.generalization_step = result.summary.generalization_step;
        row.gap_ratio = result.summary.gap_ratio;
        row.signature = to_string(result.summary.signature);
        row.final_val_acc = result.summary.final_val_acc;
      } catch (const std::exception&) {
        row.signature = "error";
      }
      rows[i] = std::move(row);
    }
  };

  const int n_workers = std::max(1, std::min<int>(spec.parallel_workers,
                                                  static_cast<int>(tasks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  write_sweep_csv(rows, out_dir + "/sweep.csv");
  return rows;
}

// ----------------------------------------------------------------------
// sweep CSV

namespace {
constexpr const char* kSweepHeader =
    "alpha,variant,seed,memorization_step,generalization_step,gap_ratio,signature,"
    "final_val_acc";
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    out << fmt_alpha(r.alpha) << ',' << r.variant << ',' << r.seed << ',';
    if (r.memorization_step) out << *r.memorization_step;
    out << ',';
    if (r.generalization_step) out << *r.generalization_step;
    out << ',';
    if (r.gap_ratio) out << fmt_full(*r.gap_ratio);
    out << ',' << r.signature << ',';
    if (r.final_val_acc) out << fmt_full(*r.final_val_acc);
    out << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) {
    throw ParseError("sweep line 1: expected header \"" + std::string(kSweepHeader) + "\"");
  }
  std::vector<SweepRow> rows;
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
    if (cells.size() != 8) {
      throw ParseError("sweep line " + std::to_string(line_no) + ": expected 8 cells");
    }
    SweepRow r;
    try {
      r.alpha = std::stod(cells[0]);
      r.variant = cells[1];
      r.seed = std::stoull(cells[2]);
      if (!cells[3].empty()) r.memorization_step = std::stoll(cells[3]);
      if (!cells[4].empty()) r.generalization_step = std::stoll(cells[4]);
      if (!cells[5].empty()) r.gap_ratio = std::stod(cells[5]);
      r.signature = cells[6];
      if (!cells[7].empty()) r.final_val_acc = std::stod(cells[7]);
    } catch (const std::exception&) {
      throw ParseError("sweep line " + std::to_string(line_no) + ": bad cell value");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ----------------------------------------------------------------------
// report

namespace {

// Median with absent-generalization treated as +inf. Returns nullopt when the
// median itself is unbounded (">max_steps").
std::optional<double> median_or_inf(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  double med;
  if (n % 2 == 1) {
    med = values[n / 2];
  } else {
    med = 0.5 * (values[n / 2 - 1] + values[n / 2]);
  }
  if (!std::isfinite(med)) return std::nullopt;
  return med;
}

}  // namespace

std::vector<ReportEntry> make_report(std::span<const SweepRow> rows) {
  if (rows.empty()) throw ContractError("report: empty sweep input");
  std::map<std::pair<double, std::string>, std::pair<std::vector<double>, std::vector<double>>>
      groups;  // (alpha, variant) -> (gen steps with inf, final accs)
  for (const SweepRow& r : rows) {
    auto& g = groups[{r.alpha, r.variant}];
    if (r.signature == "error") continue;
    g.first.push_back(r.generalization_step
                          ? static_cast<double>(*r.generalization_step)
                          : std::numeric_limits<double>::infinity());
    if (r.final_val_acc) g.second.push_back(*r.final_val_acc);
  }
  std::vector<ReportEntry> out;
  for (const auto& [key, vals] : groups) {
    ReportEntry e;
    e.alpha = key.first;
    e.variant = key.second;
    e.median_generalization_step = median_or_inf(vals.first);
    e.median_final_val_acc = median_or_inf(vals.second);
    out.push_back(std::move(e));
  }
  return out;
}

void write_report_csv(std::span<const ReportEntry> entries, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "alpha,variant,median_generalization_step,median_final_val_acc\n";
  for (const ReportEntry& e : entries) {
    out << fmt_alpha(e.alpha) << ',' << e.variant << ',';
    if (e.median_generalization_step) {
      out << fmt_alpha(*e.median_generalization_step);
    } else {
      out << ">max_steps";
    }
    out << ',';
    if (e.median_final_val_acc) out << fmt_full(*e.median_final_val_acc);
    out << '\n';
  }
}

std::string format_report_tables(std::span<const ReportEntry> entries) {
  std::vector<double> alphas;
  std::vector<std::string> variants;
  for (const ReportEntry& e : entries) {
    if (std::find(alphas.begin(), alphas.end(), e.alpha) == alphas.end()) {
      alphas.push_back(e.alpha);
    }
    if (std::find(variants.begin(), variants.end(), e.variant) == variants.end()) {
      variants.push_back(e.variant);
    }
  }
  std::sort(alphas.begin(), alphas.end());
  std::sort(variants.begin(), variants.end());
  auto lookup = [&entries](double a, const std::string& v) -> const ReportEntry* {
    for (const ReportEntry& e : entries) {
      if (e.alpha == a && e.variant == v) return &e;
    }
    return nullptr;
  };

  std::size_t vw = 10;
  for (const auto& v : variants) vw = std::max(vw, v.size());
  std::ostringstream os;
  os << "steps until generalization (median over seeds)\n";
  os << "  " << std::string(8, ' ');
  for (const auto& v : variants) os << "  " << v << std::string(vw - v.size(), ' ');
  os << '\n';
  char buf[64];
  for (double a : alphas) {
    std::snprintf(buf, sizeof(buf), "  alpha=%-6g", a);
    os << buf;
    for (const auto& v : variants) {
      const ReportEntry* e = lookup(a, v);
      std::string cell = "n/a";
      if (e && e->median_generalization_step) {
        std::snprintf(buf, sizeof(buf), "%g", *e->median_generalization_step);
        cell = buf;
      } else if (e) {
        cell = ">max_steps";
      }
      os << "  " << cell << std::string(vw > cell.size() ? vw - cell.size() : 0, ' ');
    }
    os << '\n';
  }
  os << "\nfinal validation accuracy (median over seeds)\n";
  os << "  " << std::string(vw, ' ');
  for (double a : alphas) {
    std::snprintf(buf, sizeof(buf), "  alpha=%-6g", a);
    os << buf;
  }
  os << '\n';
  for (const auto& v : variants) {
    os << "  " << v << std::string(vw - v.size(), ' ');
    for (double a : alphas) {
      const ReportEntry* e = lookup(a, v);
      std::string cell = "n/a";
      if (e && e->median_final_val_acc) {
        std::snprintf(buf, sizeof(buf), "%.4f", *e->median_final_val_acc);
        cell = buf;
      }
      os << "  " << cell << std::string(cell.size() < 12 ? 12 - cell.size() : 0, ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace groklab
