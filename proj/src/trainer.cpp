#include "edge_grpo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "edge_grpo/entropy.hpp"

namespace edge_grpo {

using nlohmann::json;

GecCounts& GecCounts::operator+=(const GecCounts& o) {
  regenerated += o.regenerated;
  injected += o.injected;
  replaced += o.replaced;
  untouched += o.untouched;
  return *this;
}

GecCounts count_provenance(const GroupRollout& group) {
  GecCounts c;
  for (const auto& m : group.members) {
    if (!m.provenance) {
      ++c.untouched;
      continue;
    }
    switch (*m.provenance) {
      case GecAction::kPromptRegenerate: ++c.regenerated; break;
      case GecAction::kAnswerInjection: ++c.injected; break;
      case GecAction::kSolutionReplacement: ++c.replaced; break;
    }
  }
  return c;
}

GroupRollout rollout_group(const PolicyParams& policy, const QuestionInstance& question,
                           const TrainConfig& config, Rng& rng) {
  const GecConfig gec = config.effective_gec();
  GroupRollout group;
  group.question = question;
  group.temperature = config.temperature;
  group.all_incorrect_before_correction = true;
  group.members.reserve(static_cast<std::size_t>(config.group_size));

  for (int i = 0; i < config.group_size; ++i) {
    Rng member_rng = rng.child({static_cast<std::uint64_t>(i)});
    const SampledResponse sample =
        sample_response(policy, question.prompt, config.temperature, config.max_len, member_rng);
    CorrectedResponse member = keep_original(sample, question, config.reward);
    if (member.verdict.correct) group.all_incorrect_before_correction = false;
    if (!member.verdict.correct && uses_correction(config.mode)) {
      const GecAction action = sample_action(gec, member_rng);
      member = apply_gec(action, sample, question, policy, gec, config.temperature,
                         config.max_len, member_rng, config.reward);
    }
    group.rewards.push_back(member.verdict.reward);
    group.old_logprobs.push_back(member.logprobs);
    group.entropies.push_back(response_entropy(member.dists));
    group.members.push_back(std::move(member));
  }
  return group;
}

AdvantageVector compute_advantages(const GroupRollout& group, const TrainConfig& config) {
  AdvantageVector adv = group_advantages(group.rewards);
  if (!uses_eda(config.mode)) {
    adv.entropy_scaled = adv.base;
    return adv;
  }
  ScaledEntropies scaled = scaled_entropies(group.entropies);
  for (double& s : scaled.values) s = std::max(s, config.entropy_floor);
  adv.entropy_scaled = entropy_driven_advantages(adv.base, scaled.values);
  return adv;
}

namespace {

void check_surrogate_inputs(const GroupRollout& group, std::span<const double> adv,
                            const SurrogateOptions& options) {
  if (adv.size() != group.members.size()) {
    throw std::invalid_argument("surrogate: advantage length differs from group size");
  }
  if (group.old_logprobs.size() != group.members.size()) {
    throw std::invalid_argument("surrogate: missing old log-probabilities");
  }
  if (options.kl_beta > 0.0 && options.reference == nullptr) {
    throw std::invalid_argument("surrogate: kl_beta > 0 needs a reference policy");
  }
}

// Walks every (member, token) of the group under `current`, handing the
// visitor the context, the current distribution and the token's ratio.
template <typename Visit>
void for_each_token(const GroupRollout& group, const PolicyParams& current, Visit&& visit) {
  for (std::size_t i = 0; i < group.members.size(); ++i) {
    const auto& member = group.members[i];
    const auto& old = group.old_logprobs[i];
    if (old.size() != member.tokens.size() || member.tokens.empty()) {
      throw std::invalid_argument("surrogate: old log-probabilities do not match member tokens");
    }
    TokenSeq history = group.question.prompt;
    history.reserve(history.size() + member.tokens.size());
    for (std::size_t t = 0; t < member.tokens.size(); ++t) {
      const TokenId tok = member.tokens[t];
      const ContextKey key = current.context_of(history);
      const std::vector<double> p = softmax(current.logits(key), group.temperature);
      const double ratio = std::exp(std::log(p[static_cast<std::size_t>(tok)]) - old[t]);
      if (!std::isfinite(ratio)) {
        throw std::runtime_error("surrogate: non-finite importance ratio at member " +
                                 std::to_string(i) + " token " + std::to_string(t));
      }
      visit(i, key, tok, p, ratio);
      history.push_back(tok);
    }
  }
}

double reference_prob(const SurrogateOptions& options, ContextKey key, TokenId tok,
                      double temperature) {
  return softmax(options.reference->logits(key), temperature)[static_cast<std::size_t>(tok)];
}

}  // namespace

double surrogate_objective(const GroupRollout& group, std::span<const double> adv,
                           const PolicyParams& current, const SurrogateOptions& options) {
  check_surrogate_inputs(group, adv, options);
  const double eps = options.clip_eps;
  const double g = static_cast<double>(group.members.size());
  double total = 0.0;
  for_each_token(group, current,
                 [&](std::size_t i, ContextKey key, TokenId tok, const std::vector<double>& p,
                     double ratio) {
                   const double a = adv[i];
                   const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
                   double term = std::min(ratio * a, clipped * a);
                   if (options.kl_beta > 0.0) {
                     const double r = reference_prob(options, key, tok, group.temperature) /
                                      p[static_cast<std::size_t>(tok)];
                     term -= options.kl_beta * (r - std::log(r) - 1.0);
                   }
                   total += term / (g * static_cast<double>(group.members[i].tokens.size()));
                 });
  return total;
}

LogitGrad surrogate_gradient(const GroupRollout& group, std::span<const double> adv,
                             const PolicyParams& current, const SurrogateOptions& options) {
  check_surrogate_inputs(group, adv, options);
  const double eps = options.clip_eps;
  const double g = static_cast<double>(group.members.size());
  const double temp = group.temperature;
  const auto vocab = static_cast<std::size_t>(current.vocab_size());
  LogitGrad grad;
  for_each_token(group, current,
                 [&](std::size_t i, ContextKey key, TokenId tok, const std::vector<double>& p,
                     double ratio) {
                   // d(term)/d(log pi(tok)); the clipped branch is flat.
                   double coeff = 0.0;
                   const double a = adv[i];
                   if (a != 0.0) {
                     const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
                     const bool in_band = ratio >= 1.0 - eps && ratio <= 1.0 + eps;
                     if (in_band || ratio * a < clipped * a) coeff += a * ratio;
                   }
                   if (options.kl_beta > 0.0) {
                     const double r = reference_prob(options, key, tok, temp) /
                                      p[static_cast<std::size_t>(tok)];
                     coeff -= options.kl_beta * (1.0 - r);
                   }
                   auto [it, inserted] = grad.try_emplace(key, vocab, 0.0);
                   if (coeff == 0.0) return;
                   const double w =
                       coeff / (g * static_cast<double>(group.members[i].tokens.size()) * temp);
                   auto& row = it->second;
                   for (std::size_t j = 0; j < vocab; ++j) row[j] -= w * p[j];
                   row[static_cast<std::size_t>(tok)] += w;
                 });
  return grad;
}

double evaluate_greedy(const PolicyParams& policy, std::span<const QuestionInstance> questions,
                       int max_len) {
  if (questions.empty()) throw std::invalid_argument("evaluate_greedy: no questions");
  Rng unused(0);
  int correct = 0;
  for (const auto& q : questions) {
    const SampledResponse r = sample_response(policy, q.prompt, 0.0, max_len, unused);
    if (verify(q, r.tokens).correct) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(questions.size());
}

json metrics_to_json(const MetricsRecord& r, bool include_wall_time) {
  json j{{"step", r.step},
         {"mean_reward", r.mean_reward},
         {"advantage_variance", r.advantage_variance},
         {"mean_entropy", r.mean_entropy},
         {"objective", r.objective},
         {"collapsed_group", r.collapsed_group},
         {"collapsed_groups", r.collapsed_groups},
         {"all_incorrect_before_correction", r.all_incorrect_before_correction},
         {"gec_counts",
          {{"regenerated", r.gec.regenerated},
           {"injected", r.gec.injected},
           {"replaced", r.gec.replaced},
           {"untouched", r.gec.untouched}}},
         {"eval_accuracy", r.eval_accuracy ? json(*r.eval_accuracy) : json(nullptr)}};
  if (include_wall_time) j["wall_ms"] = r.wall_ms;
  return j;
}

MetricsRecord metrics_from_json(const json& j) {
  MetricsRecord r;
  r.step = j.at("step").get<int>();
  r.mean_reward = j.at("mean_reward").get<double>();
  r.advantage_variance = j.at("advantage_variance").get<double>();
  r.mean_entropy = j.at("mean_entropy").get<double>();
  r.objective = j.value("objective", 0.0);
  r.collapsed_group = j.at("collapsed_group").get<bool>();
  r.collapsed_groups = j.value("collapsed_groups", 0);
  r.all_incorrect_before_correction = j.value("all_incorrect_before_correction", 0);
  const json& g = j.at("gec_counts");
  r.gec.regenerated = g.at("regenerated").get<int>();
  r.gec.injected = g.at("injected").get<int>();
  r.gec.replaced = g.at("replaced").get<int>();
  r.gec.untouched = g.at("untouched").get<int>();
  if (j.contains("eval_accuracy") && !j["eval_accuracy"].is_null()) {
    r.eval_accuracy = j["eval_accuracy"].get<double>();
  }
  r.wall_ms = j.value("wall_ms", 0.0);
  return r;
}

RunSummary train(const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  const Vocab vocab(config.tasks.modulus());
  PolicyParams policy(vocab.size(), config.context_order);
  const PolicyParams reference = policy;
  const SurrogateOptions options{config.clip_eps, config.kl_beta,
                                 config.kl_beta > 0.0 ? &reference : nullptr};

  Rng eval_rng(derive_seed(config.seed, {1}));
  const std::vector<QuestionInstance> eval_set =
      config.eval_mix().sample_set(eval_rng, config.eval_questions, "eval-");
  Rng question_rng(derive_seed(config.seed, {2}));

  std::ofstream metrics;
  if (!config.metrics_path.empty()) {
    metrics.open(config.metrics_path, std::ios::binary | std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot open metrics file '" + config.metrics_path + "'");
    json header_config = train_config_to_json(config);
    header_config.erase("metrics_path");
    metrics << json{{"schema", kMetricsSchema}, {"config", header_config}}.dump() << '\n';
  }

  RunSummary summary;
  summary.metrics_path = config.metrics_path;
  summary.initial_eval_accuracy = evaluate_greedy(policy, eval_set, config.max_len);
  summary.final_eval_accuracy = summary.initial_eval_accuracy;

  const double nq = static_cast<double>(config.questions_per_step);
  double variance_sum = 0.0;
  double reward_sum = 0.0;
  for (int step = 0; step < config.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricsRecord rec;
    rec.step = step;
    rec.collapsed_group = true;
    LogitGrad step_grad;
    double n_members = 0.0;

    for (int qi = 0; qi < config.questions_per_step; ++qi) {
      QuestionInstance q = config.tasks.sample(question_rng);
      q.id = "train-" + std::to_string(step) + "-" + std::to_string(qi);
      Rng rollout_rng(derive_seed(config.seed, {3, static_cast<std::uint64_t>(step),
                                                static_cast<std::uint64_t>(qi)}));
      const GroupRollout group = rollout_group(policy, q, config, rollout_rng);
      const AdvantageVector adv = compute_advantages(group, config);

      rec.objective += surrogate_objective(group, adv.entropy_scaled, policy, options) / nq;
      for (auto& [key, row] : surrogate_gradient(group, adv.entropy_scaled, policy, options)) {
        auto [it, inserted] = step_grad.try_emplace(key, row.size(), 0.0);
        for (std::size_t j = 0; j < row.size(); ++j) it->second[j] += row[j] / nq;
      }

      rec.advantage_variance += advantage_variance(adv.entropy_scaled) / nq;
      rec.collapsed_group = rec.collapsed_group && adv.collapsed;
      if (adv.collapsed) ++rec.collapsed_groups;
      if (group.all_incorrect_before_correction) ++rec.all_incorrect_before_correction;
      rec.gec += count_provenance(group);
      for (std::size_t i = 0; i < group.members.size(); ++i) {
        rec.mean_reward += group.rewards[i];
        rec.mean_entropy += group.entropies[i];
        n_members += 1.0;
      }
    }
    rec.mean_reward /= n_members;
    rec.mean_entropy /= n_members;
    if (!std::isfinite(rec.objective)) {
      throw std::runtime_error("non-finite surrogate objective at step " + std::to_string(step));
    }
    try {
      policy.add_scaled(step_grad, config.lr);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("update failed at step " + std::to_string(step) + ": " + e.what());
    }

    if ((step + 1) % config.eval_every == 0 || step + 1 == config.steps) {
      rec.eval_accuracy = evaluate_greedy(policy, eval_set, config.max_len);
      summary.final_eval_accuracy = *rec.eval_accuracy;
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    variance_sum += rec.advantage_variance;
    reward_sum += rec.mean_reward;
    if (metrics.is_open()) {
      metrics << metrics_to_json(rec, config.record_wall_time).dump() << '\n';
      if (!metrics) throw std::runtime_error("write failed for metrics file '" + config.metrics_path + "'");
    }
    if (on_step) on_step(rec);
    summary.history.push_back(rec);
  }

  summary.steps = config.steps;
  if (config.steps > 0) {
    summary.mean_advantage_variance = variance_sum / config.steps;
    summary.mean_reward = reward_sum / config.steps;
  }
  summary.policy = std::move(policy);
  return summary;
}

}  // namespace edge_grpo
