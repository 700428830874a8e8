#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "edge_grpo/policy.hpp"
#include "edge_grpo/tasks.hpp"
#include "edge_grpo/vocab.hpp"

namespace edge_grpo::testing {

// Hand-written question "x0 + d (mod 10)" so expected values are obvious.
inline QuestionInstance add_question(int x0, int d, int modulus = 10) {
  const Vocab v(modulus);
  QuestionInstance q;
  q.id = "q";
  q.spec = TaskSpec{1, modulus, {Op::kAdd}};
  const int answer = (x0 + d) % modulus;
  q.prompt = {Vocab::kBos, v.digit(x0), v.op_operand(Op::kAdd, d)};
  q.ground_truth = v.digit(answer);
  q.reference_solution = {v.digit(answer), Vocab::kAnswerMark, v.digit(answer), Vocab::kEos};
  return q;
}

// Order-1 policy that answers every question with `answer_digit` and nothing
// else: AM after any prompt or reflection token, the digit after AM, then EOS.
inline PolicyParams fixed_answer_policy(int modulus, int answer_digit, double peak = 100.0) {
  const Vocab v(modulus);
  PolicyParams p(v.size(), 1);
  auto peaked = [&](TokenId target) {
    std::vector<double> row(static_cast<std::size_t>(v.size()), 0.0);
    row[static_cast<std::size_t>(target)] = peak;
    return row;
  };
  auto set = [&](TokenId ctx, TokenId target) {
    const TokenSeq h = {ctx};
    p.set_logits(p.context_of(h), peaked(target));
  };
  set(Vocab::kBos, Vocab::kAnswerMark);
  for (int i = 0; i < Vocab::kNumReflect; ++i) set(v.reflect(i), Vocab::kAnswerMark);
  for (TokenId t = v.digit(0) + modulus; t < v.size(); ++t) set(t, Vocab::kAnswerMark);
  for (int d = 0; d < modulus; ++d) set(v.digit(d), Vocab::kEos);
  set(Vocab::kAnswerMark, v.digit(answer_digit));
  return p;
}

// Random logits on a random subset of contexts.
inline PolicyParams random_policy(int vocab, int order, std::mt19937_64& gen, int rows,
                                  double scale = 2.0) {
  PolicyParams p(vocab, order);
  std::uniform_int_distribution<int> tok(0, vocab - 1);
  std::normal_distribution<double> n(0.0, scale);
  for (int r = 0; r < rows; ++r) {
    TokenSeq h;
    for (int i = 0; i < order; ++i) h.push_back(tok(gen));
    std::vector<double> row(static_cast<std::size_t>(vocab));
    for (double& x : row) x = n(gen);
    p.set_logits(p.context_of(h), row);
  }
  return p;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("edge_grpo_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace edge_grpo::testing
