#pragma once

#include <span>
#include <string>
#include <vector>

#include "edge_grpo/types.hpp"

namespace edge_grpo {

struct EntropyRecord {
  std::string response_id;
  double entropy = 0.0;  // nats per token
  bool correct = false;
  double temperature = 1.0;
};

struct CalibrationStats {
  double frac_correct_above_mean = 0.0;
  double frac_incorrect_below_mean = 0.0;
  double mean_entropy = 0.0;
  int n_correct = 0;
  int n_incorrect = 0;
  int n_correct_above_mean = 0;
  int n_incorrect_below_mean = 0;
};

// Token-averaged Shannon entropy of a response's next-token distributions,
// with 0 log 0 = 0.
double response_entropy(const DistributionSeq& dists);

// Relative confidence: (mean entropy of correct - mean entropy of wrong) /
// mean entropy over all records. Negative means the correct answers are the
// more confident ones.
double rcm(std::span<const EntropyRecord> records);

// Fraction of correct responses strictly above the pooled mean entropy and of
// incorrect responses strictly below it.
CalibrationStats calibration_fractions(std::span<const EntropyRecord> records);

}  // namespace edge_grpo
