#include "edge_grpo/tasks.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace edge_grpo {

using nlohmann::json;

void TaskSpec::validate() const {
  if (chain_length < 1) throw std::invalid_argument("task spec: chain_length must be >= 1");
  if (modulus < 2) throw std::invalid_argument("task spec: modulus must be >= 2");
  if (ops.empty()) throw std::invalid_argument("task spec: op set is empty");
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
  }
  throw std::invalid_argument("unknown op");
}

Op op_from_name(std::string_view name) {
  if (name == "add") return Op::kAdd;
  if (name == "sub") return Op::kSub;
  if (name == "mul") return Op::kMul;
  throw std::invalid_argument("unknown op '" + std::string(name) + "' (expected add, sub or mul)");
}

int apply_op(Op op, int lhs, int rhs, int modulus) {
  int v = 0;
  switch (op) {
    case Op::kAdd: v = lhs + rhs; break;
    case Op::kSub: v = lhs - rhs; break;
    case Op::kMul: v = lhs * rhs; break;
  }
  v %= modulus;
  return v < 0 ? v + modulus : v;
}

QuestionInstance generate_question(const TaskSpec& spec, Rng& rng) {
  spec.validate();
  const Vocab vocab(spec.modulus);
  const auto m = static_cast<std::uint64_t>(spec.modulus);

  QuestionInstance q;
  q.spec = spec;
  int value = static_cast<int>(rng.below(m));
  q.prompt = {Vocab::kBos, vocab.digit(value)};
  for (int s = 0; s < spec.chain_length; ++s) {
    const Op op = spec.ops[rng.below(spec.ops.size())];
    const int operand = static_cast<int>(rng.below(m));
    q.prompt.push_back(vocab.op_operand(op, operand));
    value = apply_op(op, value, operand, spec.modulus);
    q.reference_solution.push_back(vocab.digit(value));
  }
  q.ground_truth = vocab.digit(value);
  q.reference_solution.push_back(Vocab::kAnswerMark);
  q.reference_solution.push_back(q.ground_truth);
  q.reference_solution.push_back(Vocab::kEos);
  return q;
}

Verdict verify(const QuestionInstance& question, std::span<const TokenId> tokens,
               const RewardOptions& options) {
  Verdict v;
  for (std::size_t i = tokens.size(); i-- > 0;) {
    if (tokens[i] == Vocab::kAnswerMark) {
      v.has_answer_mark = true;
      if (i + 1 < tokens.size()) v.extracted = tokens[i + 1];
      break;
    }
  }
  v.correct = v.extracted.has_value() && *v.extracted == question.ground_truth;
  v.reward = v.correct ? 1.0 : 0.0;
  if (options.format_bonus && v.has_answer_mark) v.reward += options.format_bonus_value;
  return v;
}

void TaskMix::validate() const {
  if (entries.empty()) throw std::invalid_argument("task mix: no task specs");
  double total = 0.0;
  for (const auto& e : entries) {
    e.spec.validate();
    if (!(e.weight >= 0.0)) throw std::invalid_argument("task mix: weights must be nonnegative");
    if (e.spec.modulus != entries.front().spec.modulus) {
      throw std::invalid_argument("task mix: all specs must share one modulus");
    }
    total += e.weight;
  }
  if (!(total > 0.0)) throw std::invalid_argument("task mix: total weight must be positive");
}

int TaskMix::modulus() const {
  validate();
  return entries.front().spec.modulus;
}

QuestionInstance TaskMix::sample(Rng& rng) const {
  double total = 0.0;
  for (const auto& e : entries) total += e.weight;
  const double u = rng.uniform() * total;
  double cum = 0.0;
  const Entry* chosen = &entries.back();
  for (const auto& e : entries) {
    cum += e.weight;
    if (u < cum) {
      chosen = &e;
      break;
    }
  }
  return generate_question(chosen->spec, rng);
}

std::vector<QuestionInstance> TaskMix::sample_set(Rng& rng, int count,
                                                  std::string_view id_prefix) const {
  validate();
  std::vector<QuestionInstance> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    auto q = sample(rng);
    q.id = std::string(id_prefix) + std::to_string(i);
    out.push_back(std::move(q));
  }
  return out;
}

json task_spec_to_json(const TaskSpec& spec) {
  json ops = json::array();
  for (Op op : spec.ops) ops.push_back(op_name(op));
  return json{{"chain_length", spec.chain_length}, {"modulus", spec.modulus}, {"ops", ops}};
}

TaskSpec task_spec_from_json(const json& j) {
  TaskSpec spec;
  spec.chain_length = j.at("chain_length").get<int>();
  spec.modulus = j.at("modulus").get<int>();
  spec.ops.clear();
  for (const auto& o : j.at("ops")) spec.ops.push_back(op_from_name(o.get<std::string>()));
  spec.validate();
  return spec;
}

void write_questions_jsonl(std::ostream& out, std::span<const QuestionInstance> questions) {
  for (const auto& q : questions) {
    json j{{"id", q.id},
           {"prompt_tokens", q.prompt},
           {"ground_truth", q.ground_truth},
           {"reference_tokens", q.reference_solution},
           {"spec", task_spec_to_json(q.spec)}};
    out << j.dump() << '\n';
  }
}

std::vector<QuestionInstance> read_questions_jsonl(std::istream& in) {
  std::vector<QuestionInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      QuestionInstance q;
      q.id = j.at("id").get<std::string>();
      q.prompt = j.at("prompt_tokens").get<TokenSeq>();
      q.ground_truth = j.at("ground_truth").get<TokenId>();
      q.reference_solution = j.at("reference_tokens").get<TokenSeq>();
      q.spec = task_spec_from_json(j.at("spec"));
      out.push_back(std::move(q));
    } catch (const std::exception& e) {
      throw std::runtime_error("questions jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace edge_grpo
