#pragma once

#include <span>
#include <vector>

namespace edge_grpo {

struct AdvantageVector {
  std::vector<double> base;            // group-normalized rewards
  std::vector<double> entropy_scaled;  // base / scaled entropy; empty until computed
  bool collapsed = false;              // all rewards identical
};

struct ScaledEntropies {
  std::vector<double> values;
  // Mean entropy was at or below the guard; values fell back to all ones.
  bool degenerate = false;
};

inline constexpr double kEntropyMeanGuard = 1e-8;

// (r_i - mean) / std with population std. A group whose rewards are all
// identical is collapsed and gets all-zero advantages.
AdvantageVector group_advantages(std::span<const double> rewards);

// P_i / mean(P).
ScaledEntropies scaled_entropies(std::span<const double> entropies);

// A_i / P_hat_i. Every scaled entry must be > 0.
std::vector<double> entropy_driven_advantages(std::span<const double> base,
                                              std::span<const double> scaled);

// Population variance of a group's final advantages.
double advantage_variance(std::span<const double> adv);

}  // namespace edge_grpo
