#pragma once

// Finite-difference check of surrogate_gradient, shared by the unit tests and
// the acceptance runner.

#include <algorithm>
#include <cmath>
#include <random>

#include "edge_grpo/trainer.hpp"
#include "support.hpp"

namespace edge_grpo::gradcheck {

inline constexpr double kStep = 1e-5;
// Ratios this close to a clip edge would let the +-h probes straddle the kink.
inline constexpr double kEdgeMargin = 1e-4;

struct Instance {
  GroupRollout group;
  std::vector<double> adv;
  PolicyParams current{2, 1};
  PolicyParams reference{2, 1};
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  TrainMode mode = TrainMode::kEdge;
};

struct Result {
  double max_rel_error = 0.0;
  int entries = 0;
  int clipped_tokens = 0;    // ratio outside [1 - eps, 1 + eps]
  int unclipped_tokens = 0;
};

struct Stats : Result {
  int instances = 0;
  void add(const Result& r) {
    ++instances;
    max_rel_error = std::max(max_rel_error, r.max_rel_error);
    entries += r.entries;
    clipped_tokens += r.clipped_tokens;
    unclipped_tokens += r.unclipped_tokens;
  }
};

inline std::vector<double> token_ratios(const Instance& inst) {
  std::vector<double> out;
  const auto& g = inst.group;
  for (std::size_t i = 0; i < g.members.size(); ++i) {
    const auto s = score_sequence(inst.current, g.question.prompt, g.members[i].tokens, g.temperature);
    for (std::size_t t = 0; t < s.logprobs.size(); ++t) {
      out.push_back(std::exp(s.logprobs[t] - g.old_logprobs[i][t]));
    }
  }
  return out;
}

inline bool near_clip_edge(const Instance& inst) {
  for (double r : token_ratios(inst)) {
    if (std::abs(r - (1.0 - inst.clip_eps)) < kEdgeMargin ||
        std::abs(r - (1.0 + inst.clip_eps)) < kEdgeMargin) {
      return true;
    }
  }
  return false;
}

// Instance `index` cycles through the four modes; odd indices perturb the
// current policy strongly so many ratios leave the clip band.
inline Instance random_instance(std::mt19937_64& gen, int index) {
  static constexpr TrainMode kModes[] = {TrainMode::kVanilla, TrainMode::kForceR,
                                         TrainMode::kForceREda, TrainMode::kEdge};
  Instance inst;
  inst.mode = kModes[index % 4];
  const int modulus = 5;
  const int vocab = Vocab(modulus).size();
  TrainConfig config;
  config.mode = inst.mode;
  config.group_size = 3 + static_cast<int>(gen() % 4);
  config.max_len = 5;
  config.temperature = 0.7 + 0.1 * static_cast<double>(gen() % 7);
  config.tasks = TaskMix{{{TaskSpec{1, modulus, {Op::kAdd, Op::kMul}}, 1.0}}};
  std::normal_distribution<double> noise(0.0, 1.0);

  const PolicyParams old = testing::random_policy(vocab, 2, gen, 120, 1.0);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(gen());
    const QuestionInstance q = generate_question(config.tasks.entries[0].spec, rng);
    inst.group = rollout_group(old, q, config, rng);
    const AdvantageVector a = compute_advantages(inst.group, config);
    inst.adv = a.entropy_scaled;
    if (!a.collapsed) break;
  }

  inst.reference = testing::random_policy(vocab, 2, gen, 60, 0.5);
  const double sigma = index % 2 == 0 ? 0.05 : 0.8;
  for (int attempt = 0; attempt < 100; ++attempt) {
    inst.current = old;
    const LogitGrad touched =
        surrogate_gradient(inst.group, inst.adv, old, SurrogateOptions{inst.clip_eps, 0.0, nullptr});
    for (const auto& [key, row] : touched) {
      std::vector<double> logits(inst.current.logits(key).begin(), inst.current.logits(key).end());
      for (double& x : logits) x += sigma * noise(gen);
      inst.current.set_logits(key, logits);
    }
    if (!near_clip_edge(inst)) break;
  }
  return inst;
}

inline double objective(const Instance& inst, const PolicyParams& params) {
  const SurrogateOptions o{inst.clip_eps, inst.kl_beta, &inst.reference};
  return surrogate_objective(inst.group, inst.adv, params, o);
}

// Largest per-entry error |analytic - fd|, relative to the largest finite
// difference magnitude in the instance (floored at 1e-8).
inline Result check(const Instance& inst) {
  Result r;
  for (double ratio : token_ratios(inst)) {
    if (ratio < 1.0 - inst.clip_eps || ratio > 1.0 + inst.clip_eps) {
      ++r.clipped_tokens;
    } else {
      ++r.unclipped_tokens;
    }
  }
  const SurrogateOptions o{inst.clip_eps, inst.kl_beta, &inst.reference};
  const LogitGrad analytic = surrogate_gradient(inst.group, inst.adv, inst.current, o);
  double max_err = 0.0, max_fd = 0.0;
  PolicyParams probe = inst.current;
  for (const auto& [key, grad_row] : analytic) {
    const std::vector<double> base(inst.current.logits(key).begin(), inst.current.logits(key).end());
    for (std::size_t j = 0; j < base.size(); ++j) {
      std::vector<double> row = base;
      row[j] = base[j] + kStep;
      probe.set_logits(key, row);
      const double up = objective(inst, probe);
      row[j] = base[j] - kStep;
      probe.set_logits(key, row);
      const double down = objective(inst, probe);
      const double fd = (up - down) / (2.0 * kStep);
      max_err = std::max(max_err, std::abs(grad_row[j] - fd));
      max_fd = std::max(max_fd, std::abs(fd));
      ++r.entries;
    }
    probe.set_logits(key, base);
  }
  r.max_rel_error = max_err / std::max(max_fd, 1e-8);
  return r;
}

}  // namespace edge_grpo::gradcheck
