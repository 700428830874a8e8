#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "edge_grpo/analytics.hpp"
#include "edge_grpo/config.hpp"
#include "edge_grpo/runner.hpp"

namespace {

using namespace edge_grpo;

void print_manifest(const RunManifest& m) {
  std::printf("%-12s seed=%llu eval %.3f -> %.3f  mean adv var %.4f  metrics %s\n", m.mode.c_str(),
              static_cast<unsigned long long>(m.seed), m.initial_eval_accuracy,
              m.final_eval_accuracy, m.mean_advantage_variance, m.metrics_path.c_str());
}

int cmd_train(const std::string& config, const std::optional<std::string>& mode,
              const std::optional<std::string>& seed, const std::optional<std::string>& out,
              bool quiet) {
  TrainOverrides o;
  if (mode) o.mode = mode_from_name(*mode);
  if (seed) o.seed = parse_seed(*seed, "--seed");
  if (out) o.out_dir = *out;
  StepCallback progress;
  if (!quiet) {
    progress = [](const MetricsRecord& r) {
      if (!r.eval_accuracy) return;
      std::fprintf(stderr, "step %5d  reward %.3f  adv var %.4f  eval %.3f\n", r.step + 1,
                   r.mean_reward, r.advantage_variance, *r.eval_accuracy);
    };
  }
  print_manifest(run_train(config, o, progress));
  return 0;
}

int cmd_analyze(const std::string& log, const std::optional<std::string>& report_path) {
  const AnalysisReport report = analyze_log(log);
  const std::string text = report_to_json(report).dump(2);
  if (report_path) {
    std::ofstream out(*report_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report '" + *report_path + "'");
    out << text << '\n';
    const auto& a = report.accuracy;
    std::printf("records %d (malformed %d, missing entropy %d)  overall %.4f  reflection %.4f  "
                "no reflection %.4f\n",
                a.total, report.malformed_lines, report.missing_entropy, a.overall_acc(),
                a.reflection_acc(), a.no_reflection_acc());
  } else {
    std::printf("%s\n", text.c_str());
  }
  return 0;
}

int cmd_ablate(const std::string& config, const std::string& out,
               const std::optional<std::string>& seed) {
  std::optional<std::uint64_t> s;
  if (seed) s = parse_seed(*seed, "--seed");
  for (const auto& m : run_gec_ablate(config, out, s)) print_manifest(m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EDGE-GRPO toy lab: train, ablate, analyze response logs, export metrics"};
  app.require_subcommand(1);

  std::string config, log, metrics, out;
  std::optional<std::string> mode, seed, out_dir, report;
  std::vector<std::string> columns;
  bool quiet = false;

  auto* train = app.add_subcommand("train", "run one training job");
  train->add_option("--config", config, "JSON config file")->required();
  train->add_option("--mode", mode, "vanilla | force-r | force-r-eda | edge");
  train->add_option("--seed", seed, "overrides the config and EDGE_GRPO_SEED");
  train->add_option("--out", out_dir, "output directory for metrics.jsonl and its manifest");
  train->add_flag("-q,--quiet", quiet, "no progress lines on stderr");

  auto* analyze = app.add_subcommand("analyze", "reflection and entropy analysis of a JSONL log");
  analyze->add_option("--log", log, "response log (JSONL)")->required();
  analyze->add_option("--report", report, "write the JSON report here instead of stdout");

  auto* exp = app.add_subcommand("export", "metrics JSONL to CSV");
  exp->add_option("--metrics", metrics, "metrics file written by train")->required();
  exp->add_option("--columns", columns, "comma-separated column names")
      ->required()
      ->delimiter(',');
  exp->add_option("--out", out, "CSV output path")->required();

  auto* ablate = app.add_subcommand("gec-ablate", "run all four modes with a shared seed");
  std::string ablate_config, ablate_out;
  std::optional<std::string> ablate_seed;
  ablate->add_option("--config", ablate_config, "JSON config file")->required();
  ablate->add_option("--out", ablate_out, "output directory")->required();
  ablate->add_option("--seed", ablate_seed, "overrides the config and EDGE_GRPO_SEED");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config, mode, seed, out_dir, quiet);
    if (*analyze) return cmd_analyze(log, report);
    if (*exp) {
      export_csv(metrics, columns, out);
      return 0;
    }
    if (*ablate) return cmd_ablate(ablate_config, ablate_out, ablate_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
