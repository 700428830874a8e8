#include "edge_grpo/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace edge_grpo {

namespace {

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

AdvantageVector group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw std::invalid_argument("group_advantages: group size must be >= 2");
  for (double r : rewards) {
    if (!std::isfinite(r)) throw std::invalid_argument("group_advantages: non-finite reward");
  }
  AdvantageVector out;
  out.base.assign(rewards.size(), 0.0);
  out.collapsed = std::all_of(rewards.begin(), rewards.end(),
                              [&](double r) { return r == rewards.front(); });
  if (out.collapsed) return out;

  const double mean = mean_of(rewards);
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / static_cast<double>(rewards.size()));
  for (std::size_t i = 0; i < rewards.size(); ++i) out.base[i] = (rewards[i] - mean) / sd;
  return out;
}

ScaledEntropies scaled_entropies(std::span<const double> entropies) {
  if (entropies.empty()) throw std::invalid_argument("scaled_entropies: empty group");
  for (double p : entropies) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("scaled_entropies: entropies must be finite and >= 0");
    }
  }
  ScaledEntropies out;
  const double mean = mean_of(entropies);
  if (mean <= kEntropyMeanGuard) {
    out.values.assign(entropies.size(), 1.0);
    out.degenerate = true;
    return out;
  }
  out.values.reserve(entropies.size());
  for (double p : entropies) out.values.push_back(p / mean);
  return out;
}

std::vector<double> entropy_driven_advantages(std::span<const double> base,
                                              std::span<const double> scaled) {
  if (base.size() != scaled.size()) {
    throw std::invalid_argument("entropy_driven_advantages: length mismatch");
  }
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!(scaled[i] > 0.0) || !std::isfinite(scaled[i])) {
      throw std::invalid_argument("entropy_driven_advantages: scaled entropy must be > 0");
    }
    out[i] = base[i] / scaled[i];
  }
  return out;
}

double advantage_variance(std::span<const double> adv) {
  if (adv.size() < 2) throw std::invalid_argument("advantage_variance: group size must be >= 2");
  const double mean = mean_of(adv);
  double ss = 0.0;
  for (double a : adv) ss += (a - mean) * (a - mean);
  return ss / static_cast<double>(adv.size());
}

}  // namespace edge_grpo
