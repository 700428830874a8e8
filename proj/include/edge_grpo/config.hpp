#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "edge_grpo/gec.hpp"
#include "edge_grpo/tasks.hpp"

namespace edge_grpo {

enum class TrainMode { kVanilla, kForceR, kForceREda, kEdge };

std::string_view mode_name(TrainMode mode);  // vanilla, force-r, force-r-eda, edge
TrainMode mode_from_name(std::string_view name);

// Force-R modes run prompt-and-regenerate on every incorrect member; EDGE
// samples among the three corrections.
bool uses_correction(TrainMode mode);
bool uses_eda(TrainMode mode);

struct TrainConfig {
  int group_size = 8;
  double temperature = 1.0;
  double clip_eps = 0.2;
  double lr = 2.0;
  int steps = 600;
  int questions_per_step = 1;
  TrainMode mode = TrainMode::kEdge;
  double kl_beta = 0.0;
  std::uint64_t seed = 0;
  int max_len = 8;
  int context_order = 2;
  TaskMix tasks{{{TaskSpec{1, 10, {Op::kAdd}}, 1.0}}};
  // Held-out evaluation distribution; defaults to `tasks`.
  std::optional<TaskMix> eval_tasks;
  GecConfig gec;
  int eval_every = 100;
  int eval_questions = 200;
  RewardOptions reward;
  // Lower bound applied to scaled entropies before dividing, so a
  // zero-entropy member cannot produce an infinite advantage.
  double entropy_floor = 1e-6;
  // Empty: no metrics file.
  std::string metrics_path;
  bool record_wall_time = true;

  void validate() const;
  const TaskMix& eval_mix() const { return eval_tasks ? *eval_tasks : tasks; }
  // GEC settings actually used by the mode (Force-R: always regenerate).
  GecConfig effective_gec() const;
};

// Field-checked conversion; unknown keys and bad values raise
// std::invalid_argument naming the field. Keys absent from `j` keep the values
// already in `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::json train_config_to_json(const TrainConfig& config);

}  // namespace edge_grpo
