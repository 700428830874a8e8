#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "edge_grpo/advantage.hpp"
#include "edge_grpo/config.hpp"
#include "edge_grpo/gec.hpp"
#include "edge_grpo/policy.hpp"
#include "edge_grpo/tasks.hpp"

namespace edge_grpo {

inline constexpr const char* kMetricsSchema = "edge-grpo-metrics/1";

struct GroupRollout {
  QuestionInstance question;
  double temperature = 1.0;
  std::vector<CorrectedResponse> members;
  std::vector<double> rewards;
  std::vector<std::vector<double>> old_logprobs;
  std::vector<double> entropies;
  // Every on-policy sample was incorrect before any correction ran.
  bool all_incorrect_before_correction = false;
};

struct GecCounts {
  int regenerated = 0;
  int injected = 0;
  int replaced = 0;
  int untouched = 0;

  GecCounts& operator+=(const GecCounts& o);
};

GecCounts count_provenance(const GroupRollout& group);

// Samples G responses and runs the mode's correction path on incorrect ones.
// Rewards are the post-correction verdicts; entropies cover every final token.
GroupRollout rollout_group(const PolicyParams& policy, const QuestionInstance& question,
                           const TrainConfig& config, Rng& rng);

// Base advantages, plus entropy-driven ones when the mode enables them
// (otherwise entropy_scaled == base). entropy_scaled is what the loss uses.
AdvantageVector compute_advantages(const GroupRollout& group, const TrainConfig& config);

struct SurrogateOptions {
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  // Reference policy for the KL penalty; required when kl_beta > 0.
  const PolicyParams* reference = nullptr;
};

// Clipped surrogate: token mean per response, response mean over the group.
// Ratios compare `current` against the group's stored old log-probabilities.
double surrogate_objective(const GroupRollout& group, std::span<const double> adv,
                           const PolicyParams& current, const SurrogateOptions& options);

// Exact gradient of surrogate_objective with respect to every logit row the
// group touches.
LogitGrad surrogate_gradient(const GroupRollout& group, std::span<const double> adv,
                             const PolicyParams& current, const SurrogateOptions& options);

// Greedy decoding accuracy; no correction is applied.
double evaluate_greedy(const PolicyParams& policy, std::span<const QuestionInstance> questions,
                       int max_len);

struct MetricsRecord {
  int step = 0;
  double mean_reward = 0.0;
  double advantage_variance = 0.0;  // mean over the step's groups, final advantages
  double mean_entropy = 0.0;
  double objective = 0.0;
  bool collapsed_group = false;  // every group in the step collapsed
  int collapsed_groups = 0;
  int all_incorrect_before_correction = 0;
  GecCounts gec;
  std::optional<double> eval_accuracy;
  double wall_ms = 0.0;
};

nlohmann::json metrics_to_json(const MetricsRecord& record, bool include_wall_time = true);
MetricsRecord metrics_from_json(const nlohmann::json& j);

struct RunSummary {
  double initial_eval_accuracy = 0.0;
  double final_eval_accuracy = 0.0;
  double mean_advantage_variance = 0.0;
  double mean_reward = 0.0;
  int steps = 0;
  std::string metrics_path;
  std::vector<MetricsRecord> history;
  PolicyParams policy{2, 1};
};

using StepCallback = std::function<void(const MetricsRecord&)>;

// Runs the full loop. Deterministic given the config (wall_ms aside). When
// config.metrics_path is set, writes a schema header line then one record per
// step.
RunSummary train(const TrainConfig& config, const StepCallback& on_step = {});

}  // namespace edge_grpo
