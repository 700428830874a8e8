#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include "edge_grpo/types.hpp"

namespace edge_grpo {

enum class Op { kAdd = 0, kSub = 1, kMul = 2 };

inline constexpr int kNumOps = 3;

// Token layout shared by the policy, the task generator and the verifier.
//
//   0            BOS (also the left-padding token for short contexts)
//   1            EOS
//   2            ANSWER_MARK
//   3..6         reflection prompt tokens (Wait!, Hmm, check again, wrong)
//   7..7+M-1     digits 0..M-1
//   7+M..        fused operator-operand tokens, one per (op, operand digit),
//                ordered add 0..M-1, sub 0..M-1, mul 0..M-1
//
// A step "x op d" is a single fused token so that an order-2 context
// (value, op-operand) determines the next value.
class Vocab {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kAnswerMark = 2;
  static constexpr TokenId kReflectBase = 3;
  static constexpr int kNumReflect = 4;
  static constexpr TokenId kDigitBase = kReflectBase + kNumReflect;

  explicit Vocab(int modulus) : modulus_(modulus) {
    if (modulus < 2) throw std::invalid_argument("vocab: modulus must be >= 2");
  }

  int modulus() const { return modulus_; }
  int size() const { return kDigitBase + modulus_ * (1 + kNumOps); }

  TokenId reflect(int i) const {
    if (i < 0 || i >= kNumReflect) throw std::out_of_range("vocab: reflect index");
    return kReflectBase + i;
  }

  TokenId digit(int value) const {
    if (value < 0 || value >= modulus_) throw std::out_of_range("vocab: digit out of range");
    return kDigitBase + value;
  }

  TokenId op_operand(Op op, int operand) const {
    if (operand < 0 || operand >= modulus_) throw std::out_of_range("vocab: operand out of range");
    return kDigitBase + modulus_ * (1 + static_cast<int>(op)) + operand;
  }

  bool is_digit(TokenId t) const { return t >= kDigitBase && t < kDigitBase + modulus_; }
  int digit_value(TokenId t) const {
    if (!is_digit(t)) throw std::invalid_argument("vocab: not a digit token");
    return t - kDigitBase;
  }

  bool is_op_operand(TokenId t) const {
    return t >= kDigitBase + modulus_ && t < size();
  }

  std::string token_name(TokenId t) const;

 private:
  int modulus_;
};

inline std::string Vocab::token_name(TokenId t) const {
  static constexpr std::array<const char*, kNumReflect> kReflectNames = {
      "<wait>", "<hmm>", "<check>", "<wrong>"};
  static constexpr std::array<char, kNumOps> kOpChars = {'+', '-', '*'};
  if (t == kBos) return "<bos>";
  if (t == kEos) return "<eos>";
  if (t == kAnswerMark) return "<ans>";
  if (t >= kReflectBase && t < kDigitBase) return kReflectNames[t - kReflectBase];
  if (is_digit(t)) return std::to_string(digit_value(t));
  if (is_op_operand(t)) {
    const int rel = t - kDigitBase - modulus_;
    return std::string(1, kOpChars[rel / modulus_]) + std::to_string(rel % modulus_);
  }
  return "<?" + std::to_string(t) + ">";
}

}  // namespace edge_grpo
