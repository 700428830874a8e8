#include "edge_grpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace edge_grpo {

namespace {

constexpr TokenId kPadToken = 0;
constexpr TokenId kEosToken = 1;

void check_token(TokenId t, int vocab_size) {
  if (t < 0 || t >= vocab_size) {
    throw std::out_of_range("policy: token id " + std::to_string(t) +
                            " outside vocabulary of size " + std::to_string(vocab_size));
  }
}

}  // namespace

PolicyParams::PolicyParams(int vocab_size, int context_order)
    : vocab_size_(vocab_size), context_order_(context_order), zero_row_(vocab_size, 0.0) {
  if (vocab_size < 2) throw std::invalid_argument("policy: vocab_size must be >= 2");
  if (context_order < 1) throw std::invalid_argument("policy: context_order must be >= 1");
  // The key must fit in 64 bits.
  long double span = 1.0L;
  for (int i = 0; i < context_order; ++i) span *= vocab_size;
  if (span > static_cast<long double>(std::numeric_limits<std::uint64_t>::max())) {
    throw std::invalid_argument("policy: vocab_size^context_order overflows the context key");
  }
}

ContextKey PolicyParams::context_of(std::span<const TokenId> history) const {
  std::uint64_t key = 0;
  const auto n = static_cast<std::ptrdiff_t>(history.size());
  for (std::ptrdiff_t i = n - context_order_; i < n; ++i) {
    const TokenId t = i >= 0 ? history[static_cast<std::size_t>(i)] : kPadToken;
    check_token(t, vocab_size_);
    key = key * static_cast<std::uint64_t>(vocab_size_) + static_cast<std::uint64_t>(t);
  }
  return ContextKey{key};
}

std::vector<TokenId> PolicyParams::context_tokens(ContextKey key) const {
  std::vector<TokenId> out(static_cast<std::size_t>(context_order_));
  std::uint64_t v = key.value;
  for (int i = context_order_ - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<TokenId>(v % static_cast<std::uint64_t>(vocab_size_));
    v /= static_cast<std::uint64_t>(vocab_size_);
  }
  return out;
}

std::span<const double> PolicyParams::logits(ContextKey key) const {
  auto it = rows_.find(key);
  if (it == rows_.end()) return zero_row_;
  return it->second;
}

void PolicyParams::set_logits(ContextKey key, std::span<const double> row) {
  if (static_cast<int>(row.size()) != vocab_size_) {
    throw std::invalid_argument("policy: logit row has wrong length");
  }
  for (double x : row) {
    if (!std::isfinite(x)) throw std::invalid_argument("policy: non-finite logit");
  }
  rows_[key].assign(row.begin(), row.end());
}

void PolicyParams::add_scaled(const LogitGrad& grad, double lr) {
  if (!std::isfinite(lr)) throw std::invalid_argument("apply_gradient: non-finite learning rate");
  for (const auto& [key, g] : grad) {
    if (static_cast<int>(g.size()) != vocab_size_) {
      throw std::invalid_argument("apply_gradient: gradient row has wrong length");
    }
    for (double x : g) {
      if (!std::isfinite(x)) throw std::invalid_argument("apply_gradient: non-finite gradient entry");
    }
  }
  if (lr == 0.0) return;
  for (const auto& [key, g] : grad) {
    if (!rows_.contains(key) && std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; })) {
      continue;
    }
    auto [it, inserted] = rows_.try_emplace(key, zero_row_);
    auto& row = it->second;
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += lr * g[j];
  }
}

std::string PolicyParams::serialize() const {
  std::ostringstream out;
  out << "edge-grpo-policy/1 " << vocab_size_ << ' ' << context_order_ << ' ' << rows_.size()
      << '\n';
  char buf[64];
  for (const auto& [key, row] : rows_) {
    bool first = true;
    for (TokenId t : context_tokens(key)) {
      if (!first) out << ' ';
      out << t;
      first = false;
    }
    for (double x : row) {
      std::snprintf(buf, sizeof(buf), " %a", x);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

PolicyParams PolicyParams::deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic;
  int vocab_size = 0;
  int order = 0;
  std::size_t n_rows = 0;
  if (!(in >> magic >> vocab_size >> order >> n_rows) || magic != "edge-grpo-policy/1") {
    throw std::runtime_error("policy: bad snapshot header");
  }
  PolicyParams params(vocab_size, order);
  std::vector<TokenId> ctx(static_cast<std::size_t>(order));
  std::vector<double> row(static_cast<std::size_t>(vocab_size));
  std::string word;
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (auto& t : ctx) {
      if (!(in >> t)) throw std::runtime_error("policy: truncated snapshot row " + std::to_string(r));
    }
    for (auto& x : row) {
      if (!(in >> word)) throw std::runtime_error("policy: truncated snapshot row " + std::to_string(r));
      char* end = nullptr;
      x = std::strtod(word.c_str(), &end);
      if (end == word.c_str() || *end != '\0') {
        throw std::runtime_error("policy: bad number '" + word + "' in snapshot row " + std::to_string(r));
      }
    }
    params.set_logits(params.context_of(ctx), row);
  }
  return params;
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("softmax: temperature must be finite and > 0");
  }
  std::vector<double> p(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp((logits[j] - mx) / temperature);
    z += p[j];
  }
  for (double& x : p) x /= z;
  return p;
}

TokenId argmax(std::span<const double> values) {
  return static_cast<TokenId>(std::max_element(values.begin(), values.end()) - values.begin());
}

SampledResponse sample_response(const PolicyParams& params, std::span<const TokenId> prefix,
                                double temperature, int max_len, Rng& rng) {
  if (max_len <= 0) throw std::invalid_argument("sample_response: max_len must be positive");
  if (!std::isfinite(temperature) || temperature < 0.0) {
    throw std::invalid_argument("sample_response: temperature must be finite and >= 0");
  }
  if (prefix.empty()) throw std::invalid_argument("sample_response: empty prefix");
  for (TokenId t : prefix) check_token(t, params.vocab_size());

  const bool greedy = temperature == 0.0;
  SampledResponse out;
  out.temperature = temperature;
  std::vector<TokenId> history(prefix.begin(), prefix.end());
  for (int step = 0; step < max_len; ++step) {
    const auto logits = params.logits(params.context_of(history));
    TokenId tok;
    std::vector<double> dist;
    if (greedy) {
      tok = argmax(logits);
      dist.assign(logits.size(), 0.0);
      dist[static_cast<std::size_t>(tok)] = 1.0;
    } else {
      dist = softmax(logits, temperature);
      const double u = rng.uniform();
      double cum = 0.0;
      // Rounding can leave the cumulative sum slightly below 1; fall back to
      // the last token with positive probability.
      tok = static_cast<TokenId>(dist.size() - 1);
      while (tok > 0 && dist[static_cast<std::size_t>(tok)] == 0.0) --tok;
      for (std::size_t j = 0; j < dist.size(); ++j) {
        cum += dist[j];
        if (u < cum) {
          tok = static_cast<TokenId>(j);
          break;
        }
      }
    }
    out.logprobs.push_back(std::log(dist[static_cast<std::size_t>(tok)]));
    out.tokens.push_back(tok);
    out.dists.push_back(std::move(dist));
    history.push_back(tok);
    if (tok == kEosToken) break;
  }
  return out;
}

ScoredSequence score_sequence(const PolicyParams& params, std::span<const TokenId> prefix,
                              std::span<const TokenId> tokens, double temperature) {
  if (tokens.empty()) throw std::invalid_argument("score_sequence: empty token sequence");
  for (TokenId t : prefix) check_token(t, params.vocab_size());
  for (TokenId t : tokens) check_token(t, params.vocab_size());
  ScoredSequence out;
  out.tokens.assign(tokens.begin(), tokens.end());
  std::vector<TokenId> history(prefix.begin(), prefix.end());
  history.reserve(prefix.size() + tokens.size());
  for (TokenId tok : tokens) {
    auto dist = softmax(params.logits(params.context_of(history)), temperature);
    out.logprobs.push_back(std::log(dist[static_cast<std::size_t>(tok)]));
    out.dists.push_back(std::move(dist));
    history.push_back(tok);
  }
  return out;
}

PolicyParams apply_gradient(const PolicyParams& params, const LogitGrad& grad, double lr) {
  PolicyParams out = params;
  out.add_scaled(grad, lr);
  return out;
}

}  // namespace edge_grpo
