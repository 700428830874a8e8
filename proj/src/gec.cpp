#include "edge_grpo/gec.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace edge_grpo {

namespace {

// The incorrect response without its terminal EOS, so the reflection prompt
// continues the answer rather than following an end-of-sequence marker.
TokenSeq open_body(const TokenSeq& tokens) {
  TokenSeq body = tokens;
  if (!body.empty() && body.back() == Vocab::kEos) body.pop_back();
  return body;
}

TokenSeq concat(const TokenSeq& a, const TokenSeq& b) {
  TokenSeq out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void require_positive_temperature(double temperature, const char* who) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument(std::string(who) + ": temperature must be finite and > 0");
  }
}

// Samples a continuation after question prompt + body and returns the rescored
// full sequence body ++ continuation.
ScoredSequence regenerate_after(const PolicyParams& policy, const QuestionInstance& question,
                                const TokenSeq& body, double temperature, int max_len, Rng& rng) {
  const TokenSeq prefix = concat(question.prompt, body);
  const SampledResponse cont = sample_response(policy, prefix, temperature, max_len, rng);
  return score_sequence(policy, question.prompt, concat(body, cont.tokens), temperature);
}

}  // namespace

std::string_view gec_action_name(GecAction action) {
  switch (action) {
    case GecAction::kPromptRegenerate: return "regenerate";
    case GecAction::kAnswerInjection: return "inject";
    case GecAction::kSolutionReplacement: return "replace";
  }
  throw std::invalid_argument("unknown GEC action");
}

TokenSeq reflection_prompt(int prompt_id) {
  if (prompt_id < 0 || prompt_id >= kNumReflectionPrompts) {
    throw std::out_of_range("reflection prompt id must be in [0, 3], got " + std::to_string(prompt_id));
  }
  return {Vocab::kReflectBase + prompt_id};
}

void GecConfig::validate() const {
  if (!(p_regenerate >= 0.0) || !(p_inject >= 0.0) || !(p_replace >= 0.0)) {
    throw std::invalid_argument("gec config: probabilities must be nonnegative");
  }
  if (std::abs(p_regenerate + p_inject + p_replace - 1.0) > 1e-9) {
    throw std::invalid_argument("gec config: probabilities must sum to 1");
  }
  if (reflection_prompt_tokens.empty()) {
    throw std::invalid_argument("gec config: reflection prompt is empty");
  }
}

GecAction action_for_uniform(const GecConfig& config, double u) {
  if (u < config.p_regenerate) return GecAction::kPromptRegenerate;
  if (u < config.p_regenerate + config.p_inject) return GecAction::kAnswerInjection;
  return GecAction::kSolutionReplacement;
}

GecAction sample_action(const GecConfig& config, Rng& rng) {
  return action_for_uniform(config, rng.uniform());
}

CorrectedResponse keep_original(const SampledResponse& response, const QuestionInstance& question,
                                const RewardOptions& reward) {
  CorrectedResponse out;
  out.tokens = response.tokens;
  out.logprobs = response.logprobs;
  out.dists = response.dists;
  out.verdict = verify(question, out.tokens, reward);
  return out;
}

CorrectedResponse apply_gec(GecAction action, const SampledResponse& incorrect,
                            const QuestionInstance& question, const PolicyParams& policy,
                            const GecConfig& config, double temperature, int max_len, Rng& rng,
                            const RewardOptions& reward) {
  require_positive_temperature(temperature, "apply_gec");
  if (verify(question, incorrect.tokens, reward).correct) {
    throw std::invalid_argument("apply_gec: response is already correct");
  }

  CorrectedResponse out;
  out.provenance = action;
  ScoredSequence scored;
  switch (action) {
    case GecAction::kPromptRegenerate: {
      const TokenSeq body = concat(open_body(incorrect.tokens), config.reflection_prompt_tokens);
      scored = regenerate_after(policy, question, body, temperature, max_len, rng);
      out.old_logprob_source = OldLogprobSource::kGenerationTime;
      break;
    }
    case GecAction::kAnswerInjection: {
      TokenSeq tokens = concat(open_body(incorrect.tokens), config.reflection_prompt_tokens);
      tokens.push_back(Vocab::kAnswerMark);
      tokens.push_back(question.ground_truth);
      tokens.push_back(Vocab::kEos);
      scored = score_sequence(policy, question.prompt, tokens, temperature);
      out.old_logprob_source = OldLogprobSource::kRescoredAtInjection;
      break;
    }
    case GecAction::kSolutionReplacement:
      scored = score_sequence(policy, question.prompt, question.reference_solution, temperature);
      out.old_logprob_source = OldLogprobSource::kRescoredAtInjection;
      break;
  }
  out.tokens = std::move(scored.tokens);
  out.logprobs = std::move(scored.logprobs);
  out.dists = std::move(scored.dists);
  out.verdict = verify(question, out.tokens, reward);
  return out;
}

SampledResponse forced_reflection(const PolicyParams& policy, const QuestionInstance& question,
                                  const SampledResponse& incorrect, int prompt_id,
                                  double temperature, int max_len, Rng& rng) {
  const TokenSeq prompt = reflection_prompt(prompt_id);
  require_positive_temperature(temperature, "forced_reflection");
  if (verify(question, incorrect.tokens).correct) {
    throw std::invalid_argument("forced_reflection: response is already correct");
  }
  const TokenSeq body = concat(open_body(incorrect.tokens), prompt);
  ScoredSequence scored = regenerate_after(policy, question, body, temperature, max_len, rng);
  SampledResponse out;
  out.tokens = std::move(scored.tokens);
  out.logprobs = std::move(scored.logprobs);
  out.dists = std::move(scored.dists);
  out.temperature = temperature;
  return out;
}

}  // namespace edge_grpo
