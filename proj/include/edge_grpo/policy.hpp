#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edge_grpo/rng.hpp"
#include "edge_grpo/types.hpp"

namespace edge_grpo {

// Identifies the k most recent tokens as a base-V integer, oldest token most
// significant.
struct ContextKey {
  std::uint64_t value = 0;
  auto operator<=>(const ContextKey&) const = default;
};

// Sparse gradient (or update) over logit rows, keyed like PolicyParams.
using LogitGrad = std::map<ContextKey, std::vector<double>>;

// Order-k tabular softmax policy. Contexts never written hold the all-zero
// logit row, i.e. the uniform distribution. Reads never insert, so a const
// PolicyParams can be shared by concurrent samplers.
class PolicyParams {
 public:
  PolicyParams(int vocab_size, int context_order);

  int vocab_size() const { return vocab_size_; }
  int context_order() const { return context_order_; }

  // Context formed by the last k tokens of `history`, left-padded with token 0.
  ContextKey context_of(std::span<const TokenId> history) const;
  std::vector<TokenId> context_tokens(ContextKey key) const;

  // Logit row for `key`; a shared zero row when the context is unseen.
  std::span<const double> logits(ContextKey key) const;
  void set_logits(ContextKey key, std::span<const double> row);

  const std::map<ContextKey, std::vector<double>>& rows() const { return rows_; }

  // In-place ascent step logits += lr * grad. Rejects non-finite entries
  // before touching any row.
  void add_scaled(const LogitGrad& grad, double lr);

  // Text table, one row per stored context: context tokens, then V logits as
  // hexadecimal floats. Round-trips bit-exactly.
  std::string serialize() const;
  static PolicyParams deserialize(std::string_view text);

  bool operator==(const PolicyParams&) const = default;

 private:
  int vocab_size_;
  int context_order_;
  std::map<ContextKey, std::vector<double>> rows_;
  std::vector<double> zero_row_;
};

struct SampledResponse {
  TokenSeq tokens;
  std::vector<double> logprobs;  // nats
  DistributionSeq dists;         // temperature-scaled distributions sampled from
  double temperature = 1.0;      // 0 means greedy
};

struct ScoredSequence {
  TokenSeq tokens;
  std::vector<double> logprobs;
  DistributionSeq dists;
};

// softmax(logits / temperature), computed stably. temperature must be > 0.
std::vector<double> softmax(std::span<const double> logits, double temperature);

// Index of the largest entry; ties go to the lowest index.
TokenId argmax(std::span<const double> values);

// Autoregressive sampling after `prefix` until EOS (token 1) or max_len
// tokens. temperature == 0 decodes greedily and records one-hot
// distributions.
SampledResponse sample_response(const PolicyParams& params, std::span<const TokenId> prefix,
                                double temperature, int max_len, Rng& rng);

ScoredSequence score_sequence(const PolicyParams& params, std::span<const TokenId> prefix,
                              std::span<const TokenId> tokens, double temperature);

// Returns a copy of `params` with logits + lr * grad.
PolicyParams apply_gradient(const PolicyParams& params, const LogitGrad& grad, double lr);

}  // namespace edge_grpo
