#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "edge_grpo/rng.hpp"
#include "edge_grpo/types.hpp"
#include "edge_grpo/vocab.hpp"

namespace edge_grpo {

// A modular-arithmetic chain "x0 op1 d1 op2 d2 ... opL dL (mod M)".
struct TaskSpec {
  int chain_length = 1;
  int modulus = 10;
  std::vector<Op> ops = {Op::kAdd};

  void validate() const;
  bool operator==(const TaskSpec&) const = default;
};

struct QuestionInstance {
  std::string id;
  TaskSpec spec;
  // BOS, initial digit, then one fused op-operand token per step.
  TokenSeq prompt;
  TokenId ground_truth = 0;
  // Running value after each step, ANSWER_MARK, the answer, EOS.
  TokenSeq reference_solution;

  Vocab vocab() const { return Vocab(spec.modulus); }
  bool operator==(const QuestionInstance&) const = default;
};

struct RewardOptions {
  bool format_bonus = false;
  double format_bonus_value = 0.05;
};

struct Verdict {
  double reward = 0.0;
  std::optional<TokenId> extracted;
  bool has_answer_mark = false;
  bool correct = false;
};

std::string_view op_name(Op op);
Op op_from_name(std::string_view name);

int apply_op(Op op, int lhs, int rhs, int modulus);

QuestionInstance generate_question(const TaskSpec& spec, Rng& rng);

// Takes the token right after the last ANSWER_MARK as the answer. Never
// throws on malformed responses.
Verdict verify(const QuestionInstance& question, std::span<const TokenId> tokens,
               const RewardOptions& options = {});

// Weighted mixture of task specs sharing one modulus (one vocabulary).
struct TaskMix {
  struct Entry {
    TaskSpec spec;
    double weight = 1.0;
  };
  std::vector<Entry> entries;

  void validate() const;
  int modulus() const;
  QuestionInstance sample(Rng& rng) const;
  std::vector<QuestionInstance> sample_set(Rng& rng, int count, std::string_view id_prefix) const;
};

nlohmann::json task_spec_to_json(const TaskSpec& spec);
TaskSpec task_spec_from_json(const nlohmann::json& j);

// JSONL with one {"id","prompt_tokens","ground_truth","reference_tokens","spec"}
// object per line.
void write_questions_jsonl(std::ostream& out, std::span<const QuestionInstance> questions);
std::vector<QuestionInstance> read_questions_jsonl(std::istream& in);

}  // namespace edge_grpo
