// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "morq/fakequant.hpp"
#include "morq/formats.hpp"
#include "morq/harness.hpp"
#include "morq/mor.hpp"
#include "morq/stats.hpp"

namespace fs = std::filesystem;
using namespace morq;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

int env_threads() {
  const char* v = std::getenv("MORQ_THREADS");
  if (!v) return 1;
  int n = std::atoi(v);
  return n < 1 ? 1 : n;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f || !f.write(text.data(), static_cast<std::streamsize>(text.size())))
      throw std::runtime_error("cannot write " + tmp);
  }
  fs::rename(tmp, path);
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct SelectionFlags {
  std::string recipe = "tensor";
  std::string partition = "block:128x128";
  std::string strategy = "gam";
  double threshold = 0.045;

  void attach(CLI::App* cmd) {
    cmd->add_option("--recipe", recipe,
                    "Selection recipe: tensor | two-way | three-way")
        ->capture_default_str();
    cmd->add_option("--partition", partition,
                    "tensor | block:RxC | channel:{row|col} | "
                    "subchannel:{row|col}:N")
        ->capture_default_str();
    cmd->add_option("--strategy", strategy, "gam | amax | e8m0")
        ->capture_default_str();
    cmd->add_option("--threshold", threshold, "E4M3 acceptance threshold")
        ->capture_default_str();
  }

  Recipe make_recipe() const { return Recipe::parse(recipe, threshold); }
  PartitionSpec make_partition() const {
    return PartitionSpec::parse(partition);
  }
  ScalingStrategy make_strategy() const { return parse_strategy(strategy); }
};

std::string decisions_to_jsonl(const std::vector<DecisionRecord>& log) {
  std::string out;
  for (const DecisionRecord& r : log) {
    out += decision_record_to_json(r);
    out += '\n';
  }
  return out;
}

std::vector<TensorF32> load_dir(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".mort")
      files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::runtime_error("no .mort files in " + dir);
  std::vector<TensorF32> tensors;
  tensors.reserve(files.size());
  for (const auto& f : files) tensors.push_back(read_mort(f));
  return tensors;
}

int cmd_quantize(const std::string& input, const std::string& output,
                 const std::string& decisions, const SelectionFlags& sel) {
  TensorF32 t = read_mort(input);
  FakeQuantResult r = fake_quantize(t, sel.make_recipe(), sel.make_partition(),
                                    sel.make_strategy());
  write_mort(output, r.output);

  if (!decisions.empty()) {
    DecisionRecord rec;
    rec.tensor_key = TensorKey{}.label();
    rec.step = 0;
    rec.partition = sel.partition;
    rec.decisions = r.quantized.decisions;
    rec.global_rel_error = r.quantized.global_rel_error;
    rec.per_block_errors = r.quantized.block_rel_errors;
    write_text_atomic(decisions, decisions_to_jsonl({rec}));
  }
  return 0;
}

int cmd_analyze(const std::string& dir, const std::string& spec_path,
                const std::string& heatmap_csv, const std::string& heatmap_json,
                const std::string& fallback_path,
                const std::string& decisions_path, uint64_t reset_period,
                const std::string& ordering, const SelectionFlags& sel) {
  ReplayResult result{StatsState(reset_period), {}, 0, 0};
  TensorKey key;
  if (!dir.empty()) {
    auto tensors = load_dir(dir);
    result = run_replay(tensors, key, sel.make_recipe(), sel.make_partition(),
                        sel.make_strategy(), reset_period);
  } else if (!spec_path.empty()) {
    TensorStreamSpec spec = TensorStreamSpec::from_json(read_text(spec_path));
    TensorStream stream(spec);
    key = spec.key;
    result = run_replay(stream, sel.make_recipe(), sel.make_partition(),
                        sel.make_strategy(), reset_period, env_threads());
  } else {
    throw std::runtime_error("analyze: need --dir or --spec");
  }
  result.stats.flush();

  Heatmap h;
  if (ordering == "tensor") {
    h = export_heatmap(result.stats, HeatmapOrdering::ByTensor);
  } else if (ordering == "step") {
    TensorKey k = result.stats.keys().empty()
                      ? key
                      : result.stats.keys().begin()->first;
    h = export_heatmap(result.stats, HeatmapOrdering::ByStep, k);
  } else {
    throw std::runtime_error("analyze: ordering must be tensor or step");
  }

  if (!heatmap_csv.empty()) write_text_atomic(heatmap_csv, heatmap_to_csv(h));
  if (!heatmap_json.empty())
    write_text_atomic(heatmap_json, heatmap_to_json(h));
  if (!fallback_path.empty())
    write_text_atomic(fallback_path, fallback_to_json(result.stats));
  if (!decisions_path.empty())
    write_text_atomic(decisions_path, decisions_to_jsonl(result.log));
  return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out,
              const std::vector<double>& thresholds,
              const std::vector<std::string>& partitions,
              const std::vector<std::string>& strategies,
              uint64_t reset_period) {
  TensorStreamSpec spec = TensorStreamSpec::from_json(read_text(spec_path));
  TensorStream stream(spec);

  std::string csv =
      "threshold,partition,strategy,fallback_fraction,mean_rel_error,"
      "avg_bits_per_element\n";
  for (double th : thresholds) {
    for (const std::string& part : partitions) {
      for (const std::string& strat : strategies) {
        ReplayResult r =
            run_replay(stream, Recipe::tensor_level(th),
                       PartitionSpec::parse(part), parse_strategy(strat),
                       reset_period, env_threads());
        double fallback = fallback_percentage(r.stats).value_or(0.0);
        double mean_err = 0.0;
        for (const DecisionRecord& rec : r.log)
          mean_err += rec.global_rel_error;
        if (!r.log.empty()) mean_err /= static_cast<double>(r.log.size());
        uint64_t elems = r.fp8_elements + r.bf16_elements;
        double bits = elems ? (8.0 * static_cast<double>(r.fp8_elements) +
                               16.0 * static_cast<double>(r.bf16_elements)) /
                                  static_cast<double>(elems)
                            : 0.0;
        char line[256];
        std::snprintf(line, sizeof line, "%g,%s,%s,%.9g,%.9g,%.6g\n", th,
                      part.c_str(), strat.c_str(), fallback, mean_err, bits);
        csv += line;
      }
    }
  }
  write_text_atomic(out, csv);
  return 0;
}

int cmd_train_toy(const std::string& config_path,
                  const std::string& report_path) {
  ToyModelConfig config = ToyModelConfig::from_json(read_text(config_path));
  TrainReport report = train_toy(config);
  if (!report_path.empty()) write_text_atomic(report_path, report.to_json());
  std::printf("final_loss=%.6g steps=%zu%s\n",
              static_cast<double>(report.final_loss), report.losses.size(),
              report.diverged ? " DIVERGED" : "");
  if (report.diverged) {
    nlohmann::json err = {{"error", "training diverged"},
                          {"step", report.divergence_step}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return kExitDivergence;
  }
  return 0;
}

int cmd_gemm_bench(size_t m, size_t k, size_t n, uint64_t seed, double sigma,
                   const SelectionFlags& sel) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto heavy = [&](size_t rows, size_t cols) {
    TensorF32 t(rows, cols);
    for (size_t r = 0; r < rows; ++r)
      for (size_t c = 0; c < cols; ++c)
        t(r, c) = static_cast<float>(
            std::copysign(std::exp(sigma * normal(rng)), normal(rng)));
    return t;
  };
  TensorF32 a = heavy(m, k);
  TensorF32 b = heavy(k, n);

  Recipe recipe = sel.make_recipe();
  PartitionSpec part = sel.make_partition();
  ScalingStrategy strat = sel.make_strategy();
  QuantizedTensor aq = mor_quantize(a, recipe, part, strat);
  QuantizedTensor bq = mor_quantize(b, recipe, part, strat);
  GemmResult r = block_gemm(aq, bq);
  TensorF32 exact = reference_gemm(a, b);

  double err2 = 0.0, ref2 = 0.0;
  for (size_t i = 0; i < exact.size(); ++i) {
    double d = static_cast<double>(r.output.values()[i]) -
               static_cast<double>(exact.values()[i]);
    err2 += d * d;
    ref2 += static_cast<double>(exact.values()[i]) *
            static_cast<double>(exact.values()[i]);
  }

  nlohmann::json j;
  j["shape"] = {m, k, n};
  j["fp8_macs"] = r.cost.fp8_macs;
  j["bf16_macs"] = r.cost.bf16_macs;
  j["upcast_blocks"] = r.cost.upcast_blocks;
  j["total_macs"] = r.cost.total_macs();
  j["speedup_estimate"] = r.cost.speedup_estimate();
  j["rel_frobenius_error"] = ref2 > 0 ? std::sqrt(err2 / ref2) : 0.0;
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int cmd_dump_tables(const std::string& outdir) {
  fs::path dir = fs::path(outdir) / "formats" / "tables";
  fs::create_directories(dir);
  write_text_atomic((dir / "e4m3.json").string(),
                    decode_table_json(FormatKind::E4M3));
  write_text_atomic((dir / "e5m2.json").string(),
                    decode_table_json(FormatKind::E5M2));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-precision quantization emulation toolkit"};
  app.require_subcommand(1);

  // quantize
  auto* quantize = app.add_subcommand(
      "quantize", "Fake-quantize a MORT tensor and log the decisions");
  std::string q_in, q_out, q_decisions;
  SelectionFlags q_sel;
  quantize->add_option("--input", q_in, "Input .mort file")->required();
  quantize->add_option("--output", q_out, "Output .mort file")->required();
  quantize->add_option("--decisions", q_decisions, "Decision log (.jsonl)");
  q_sel.attach(quantize);

  // analyze
  auto* analyze = app.add_subcommand(
      "analyze", "Replay a tensor stream and export heatmap/fallback stats");
  std::string a_dir, a_spec, a_csv, a_json, a_fallback, a_decisions;
  std::string a_ordering = "tensor";
  uint64_t a_reset = 6000;
  SelectionFlags a_sel;
  analyze->add_option("--dir", a_dir, "Directory of .mort step files");
  analyze->add_option("--spec", a_spec, "Stream spec (.json)");
  analyze->add_option("--heatmap", a_csv, "Heatmap CSV output");
  analyze->add_option("--heatmap-json", a_json, "Heatmap JSON output");
  analyze->add_option("--fallback", a_fallback, "Fallback JSON output");
  analyze->add_option("--decisions", a_decisions, "Decision log (.jsonl)");
  analyze->add_option("--reset-period", a_reset, "Histogram reset period")
      ->capture_default_str();
  analyze->add_option("--ordering", a_ordering, "Heatmap rows: tensor | step")
      ->capture_default_str();
  a_sel.attach(analyze);

  // sweep
  auto* sweep = app.add_subcommand(
      "sweep", "Grid over thresholds x partitions x strategies");
  std::string s_spec, s_out = "sweep.csv";
  std::vector<double> s_thresholds{0.045};
  std::vector<std::string> s_partitions{"block:128x128"};
  std::vector<std::string> s_strategies{"gam"};
  uint64_t s_reset = 6000;
  sweep->add_option("--spec", s_spec, "Stream spec (.json)")->required();
  sweep->add_option("--out", s_out, "Output CSV")->capture_default_str();
  sweep->add_option("--thresholds", s_thresholds, "Threshold grid")
      ->delimiter(',');
  sweep->add_option("--partitions", s_partitions, "Partition grid")
      ->delimiter(',');
  sweep->add_option("--strategies", s_strategies, "Strategy grid")
      ->delimiter(',');
  sweep->add_option("--reset-period", s_reset, "Histogram reset period")
      ->capture_default_str();

  // train-toy
  auto* train = app.add_subcommand(
      "train-toy", "Train the toy regression model with fake quantization");
  std::string t_config, t_report;
  train->add_option("--config", t_config, "Config (.json)")->required();
  train->add_option("--report", t_report, "Report output (.json)");

  // gemm-bench
  auto* bench = app.add_subcommand(
      "gemm-bench", "Quantize two random operands and cost their GEMM");
  size_t b_m = 256, b_k = 256, b_n = 256;
  uint64_t b_seed = 0;
  double b_sigma = 1.5;
  SelectionFlags b_sel;
  b_sel.recipe = "two-way";
  bench->add_option("--rows", b_m, "Output rows")->capture_default_str();
  bench->add_option("--inner", b_k, "Contraction size")->capture_default_str();
  bench->add_option("--cols", b_n, "Output cols")->capture_default_str();
  bench->add_option("--seed", b_seed, "RNG seed")->capture_default_str();
  bench->add_option("--sigma", b_sigma, "Lognormal spread of the operands")
      ->capture_default_str();
  b_sel.attach(bench);

  // dump-tables
  auto* tables = app.add_subcommand(
      "dump-tables", "Write the 256-entry decode tables as JSON");
  std::string d_outdir = ".";
  tables->add_option("--outdir", d_outdir, "Output root")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    nlohmann::json err = {{"error", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return kExitUsage;
  }

  try {
    if (quantize->parsed())
      return cmd_quantize(q_in, q_out, q_decisions, q_sel);
    if (analyze->parsed())
      return cmd_analyze(a_dir, a_spec, a_csv, a_json, a_fallback, a_decisions,
                         a_reset, a_ordering, a_sel);
    if (sweep->parsed())
      return cmd_sweep(s_spec, s_out, s_thresholds, s_partitions, s_strategies,
                       s_reset);
    if (train->parsed()) return cmd_train_toy(t_config, t_report);
    if (bench->parsed())
      return cmd_gemm_bench(b_m, b_k, b_n, b_seed, b_sigma, b_sel);
    if (tables->parsed()) return cmd_dump_tables(d_outdir);
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return kExitUsage;
  }
  return 0;
}
