#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "edge_grpo/config.hpp"
#include "edge_grpo/trainer.hpp"

namespace edge_grpo {

inline constexpr const char* kSeedEnvVar = "EDGE_GRPO_SEED";

struct TrainOverrides {
  std::optional<TrainMode> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
};

// Parses a seed string (decimal, no sign). Throws std::invalid_argument.
std::uint64_t parse_seed(const std::string& text, const std::string& what);

// Reads and validates a JSON config file. Errors name the path; validation
// errors also name the offending field.
nlohmann::json read_config_json(const std::filesystem::path& path);

// Applies overrides on top of a config document. Seed precedence: override,
// then the file's "seed", then env_seed, then the built-in default.
TrainConfig resolve_config(const nlohmann::json& file, const TrainOverrides& overrides,
                           const std::optional<std::string>& env_seed);

// FNV-1a over the canonical JSON of the config, metrics_path excluded.
std::string config_hash(const TrainConfig& config);

std::string version_string();

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::string metrics_path;
  std::string mode;
  std::string created_at;  // UTC, ISO 8601
  double initial_eval_accuracy = 0.0;
  double final_eval_accuracy = 0.0;
  double mean_advantage_variance = 0.0;
  int steps = 0;
};

nlohmann::json manifest_to_json(const RunManifest& m);

// Manifest location for a metrics file: "<dir>/<stem>.manifest.json".
std::filesystem::path manifest_path_for(const std::filesystem::path& metrics_path);

// Trains with `config` (metrics_path must be set) and writes the manifest
// next to the metrics file.
RunManifest run_config(const TrainConfig& config, const StepCallback& on_step = {});

// Loads the config at `config_path`, applies overrides and the environment
// seed, then runs. Metrics go to <out>/metrics.jsonl when an output directory
// is given, else to the config's metrics_path, else to
// runs/<mode>-seed<seed>/metrics.jsonl.
RunManifest run_train(const std::filesystem::path& config_path, const TrainOverrides& overrides,
                      const StepCallback& on_step = {});

// Runs vanilla, force-r, force-r-eda and edge with the same seed, writing
// <out>/<mode>.jsonl and a manifest per mode, plus <out>/ablation.json.
std::vector<RunManifest> run_gec_ablate(const std::filesystem::path& config_path,
                                        const std::filesystem::path& out_dir,
                                        std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace edge_grpo
