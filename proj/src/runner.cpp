#include "edge_grpo/runner.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#ifndef EDGE_GRPO_VERSION
#define EDGE_GRPO_VERSION "0.0.0"
#endif

namespace edge_grpo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void ensure_parent(const fs::path& file) {
  const fs::path dir = file.parent_path();
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir.string() + "': " + ec.message());
}

}  // namespace

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
  if (text.empty() || text.size() > 20 ||
      !std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw std::invalid_argument(what + ": expected a nonnegative integer seed, got '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::out_of_range&) {
    throw std::invalid_argument(what + ": seed out of range '" + text + "'");
  }
}

json read_config_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

TrainConfig resolve_config(const json& file, const TrainOverrides& overrides,
                           const std::optional<std::string>& env_seed) {
  TrainConfig base;
  if (env_seed && !env_seed->empty()) base.seed = parse_seed(*env_seed, kSeedEnvVar);
  TrainConfig config = train_config_from_json(file, base);
  if (overrides.mode) config.mode = *overrides.mode;
  if (overrides.seed) config.seed = *overrides.seed;
  config.validate();
  return config;
}

std::string config_hash(const TrainConfig& config) {
  json j = train_config_to_json(config);
  j.erase("metrics_path");
  const std::string canonical = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string version_string() { return std::string("v") + EDGE_GRPO_VERSION; }

json manifest_to_json(const RunManifest& m) {
  return json{{"config_hash", m.config_hash},
              {"seed", m.seed},
              {"version", m.version},
              {"metrics_path", m.metrics_path},
              {"mode", m.mode},
              {"created_at", m.created_at},
              {"initial_eval_accuracy", m.initial_eval_accuracy},
              {"final_eval_accuracy", m.final_eval_accuracy},
              {"mean_advantage_variance", m.mean_advantage_variance},
              {"steps", m.steps}};
}

fs::path manifest_path_for(const fs::path& metrics_path) {
  return metrics_path.parent_path() / (metrics_path.stem().string() + ".manifest.json");
}

RunManifest run_config(const TrainConfig& config, const StepCallback& on_step) {
  if (config.metrics_path.empty()) throw std::invalid_argument("run_config: metrics_path is empty");
  ensure_parent(config.metrics_path);
  RunManifest m;
  m.created_at = utc_timestamp();
  const RunSummary summary = train(config, on_step);
  m.config_hash = config_hash(config);
  m.seed = config.seed;
  m.version = version_string();
  m.metrics_path = config.metrics_path;
  m.mode = std::string(mode_name(config.mode));
  m.initial_eval_accuracy = summary.initial_eval_accuracy;
  m.final_eval_accuracy = summary.final_eval_accuracy;
  m.mean_advantage_variance = summary.mean_advantage_variance;
  m.steps = summary.steps;
  write_json_file(manifest_path_for(config.metrics_path), manifest_to_json(m));
  return m;
}

namespace {

std::optional<std::string> env_seed() {
  const char* v = std::getenv(kSeedEnvVar);
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

TrainConfig load_config(const fs::path& path, const TrainOverrides& overrides) {
  const json file = read_config_json(path);
  try {
    return resolve_config(file, overrides, env_seed());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("config file '" + path.string() + "': " + e.what());
  }
}

}  // namespace

RunManifest run_train(const fs::path& config_path, const TrainOverrides& overrides,
                      const StepCallback& on_step) {
  TrainConfig config = load_config(config_path, overrides);
  if (overrides.out_dir) {
    config.metrics_path = (*overrides.out_dir / "metrics.jsonl").string();
  } else if (config.metrics_path.empty()) {
    config.metrics_path = (fs::path("runs") /
                           (std::string(mode_name(config.mode)) + "-seed" +
                            std::to_string(config.seed)) /
                           "metrics.jsonl")
                              .string();
  }
  return run_config(config, on_step);
}

std::vector<RunManifest> run_gec_ablate(const fs::path& config_path, const fs::path& out_dir,
                                        std::optional<std::uint64_t> seed) {
  TrainOverrides overrides;
  overrides.seed = seed;
  const TrainConfig base = load_config(config_path, overrides);
  std::vector<RunManifest> manifests;
  json summary = json::array();
  for (TrainMode mode :
       {TrainMode::kVanilla, TrainMode::kForceR, TrainMode::kForceREda, TrainMode::kEdge}) {
    TrainConfig config = base;
    config.mode = mode;
    config.metrics_path = (out_dir / (std::string(mode_name(mode)) + ".jsonl")).string();
    manifests.push_back(run_config(config));
    summary.push_back(manifest_to_json(manifests.back()));
  }
  write_json_file(out_dir / "ablation.json", summary);
  return manifests;
}

}  // namespace edge_grpo
