#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "edge_grpo/policy.hpp"
#include "edge_grpo/rng.hpp"
#include "edge_grpo/tasks.hpp"
#include "edge_grpo/types.hpp"

namespace edge_grpo {

enum class GecAction { kPromptRegenerate, kAnswerInjection, kSolutionReplacement };

std::string_view gec_action_name(GecAction action);

// Where a member's old-policy log-probabilities come from.
enum class OldLogprobSource { kGenerationTime, kRescoredAtInjection };

inline constexpr int kNumReflectionPrompts = Vocab::kNumReflect;

// Prompt table for forced reflection: "Wait!", "Hmm", "Let's check it again!",
// "Something is wrong here.", each a single reserved token.
TokenSeq reflection_prompt(int prompt_id);

struct GecConfig {
  double p_regenerate = 0.5;
  double p_inject = 0.25;
  double p_replace = 0.25;
  TokenSeq reflection_prompt_tokens = {Vocab::kReflectBase};

  void validate() const;
};

struct CorrectedResponse {
  TokenSeq tokens;
  std::vector<double> logprobs;
  DistributionSeq dists;
  std::optional<GecAction> provenance;  // nullopt: the original on-policy response
  OldLogprobSource old_logprob_source = OldLogprobSource::kGenerationTime;
  Verdict verdict;
};

GecAction action_for_uniform(const GecConfig& config, double u);
GecAction sample_action(const GecConfig& config, Rng& rng);

// Wraps an untouched on-policy response.
CorrectedResponse keep_original(const SampledResponse& response, const QuestionInstance& question,
                                const RewardOptions& reward = {});

// Applies one correction to an incorrect response. The final sequence is
// rescored under `policy` at `temperature`; max_len bounds the regenerated
// continuation.
CorrectedResponse apply_gec(GecAction action, const SampledResponse& incorrect,
                            const QuestionInstance& question, const PolicyParams& policy,
                            const GecConfig& config, double temperature, int max_len, Rng& rng,
                            const RewardOptions& reward = {});

// Appends reflection prompt `prompt_id` to an incorrect response and samples a
// continuation. The returned response covers the whole extended sequence.
SampledResponse forced_reflection(const PolicyParams& policy, const QuestionInstance& question,
                                  const SampledResponse& incorrect, int prompt_id,
                                  double temperature, int max_len, Rng& rng);

}  // namespace edge_grpo
