#include "edge_grpo/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace edge_grpo {

double response_entropy(const DistributionSeq& dists) {
  if (dists.empty()) throw std::invalid_argument("response_entropy: empty response");
  double total = 0.0;
  for (const auto& dist : dists) {
    double sum = 0.0;
    double h = 0.0;
    for (double p : dist) {
      if (p < -1e-9 || !std::isfinite(p)) {
        throw std::invalid_argument("response_entropy: invalid probability");
      }
      sum += p;
      if (p > 0.0) h -= p * std::log(p);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument("response_entropy: distribution does not sum to 1");
    }
    total += h;
  }
  return total / static_cast<double>(dists.size());
}

double rcm(std::span<const EntropyRecord> records) {
  if (records.empty()) throw std::domain_error("rcm: no records");
  // Means are taken relative to the minimum so that equal entropies give an
  // exact zero numerator.
  double lo = records.front().entropy;
  for (const auto& r : records) lo = std::min(lo, r.entropy);
  double excess_c = 0.0;
  double excess_w = 0.0;
  int n_c = 0;
  int n_w = 0;
  for (const auto& r : records) {
    if (r.correct) {
      excess_c += r.entropy - lo;
      ++n_c;
    } else {
      excess_w += r.entropy - lo;
      ++n_w;
    }
  }
  if (n_c == 0 || n_w == 0) {
    throw std::domain_error("rcm: needs at least one correct and one incorrect record");
  }
  const double mean_all = lo + (excess_c + excess_w) / static_cast<double>(n_c + n_w);
  if (mean_all == 0.0) throw std::domain_error("rcm: mean entropy is zero");
  return (excess_c / n_c - excess_w / n_w) / mean_all;
}

CalibrationStats calibration_fractions(std::span<const EntropyRecord> records) {
  if (records.empty()) throw std::invalid_argument("calibration_fractions: no records");
  CalibrationStats s;
  // Shifted mean: exact when all entropies are equal, so ties stay ties.
  double lo = records.front().entropy;
  for (const auto& r : records) lo = std::min(lo, r.entropy);
  double excess = 0.0;
  for (const auto& r : records) excess += r.entropy - lo;
  s.mean_entropy = lo + excess / static_cast<double>(records.size());
  for (const auto& r : records) {
    if (r.correct) {
      ++s.n_correct;
      if (r.entropy > s.mean_entropy) ++s.n_correct_above_mean;
    } else {
      ++s.n_incorrect;
      if (r.entropy < s.mean_entropy) ++s.n_incorrect_below_mean;
    }
  }
  if (s.n_correct > 0) {
    s.frac_correct_above_mean = static_cast<double>(s.n_correct_above_mean) / s.n_correct;
  }
  if (s.n_incorrect > 0) {
    s.frac_incorrect_below_mean = static_cast<double>(s.n_incorrect_below_mean) / s.n_incorrect;
  }
  return s;
}

}  // namespace edge_grpo
