#pragma once

#include "rekd/eval.hpp"
#include "rekd/training.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace rekd {

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

// One budget setting of the ratio/accuracy sweep, aggregated over seeds.
// A failed seed lands in errors and is excluded from the aggregates.
struct SweepCell {
  double p_target = 0.0;
  std::vector<double> accuracies;  // test accuracy per successful seed
  std::vector<double> ratios;      // test rationale ratio per successful seed

  std::vector<std::string> errors;

  double acc_mean() const { return mean_of(accuracies); }
  double acc_std() const { return sample_std_of(accuracies); }
  double ratio_mean() const { return mean_of(ratios); }
  double ratio_std() const { return sample_std_of(ratios); }
};

// Trains base once per (p_target, seed) pair and evaluates the selected model
// on the test split. teacher is required for the rekd regime, ignored
// otherwise. Per-run failures are recorded in the cell; only setup errors
// (bad base config, missing teacher) throw.
std::vector<SweepCell> sweep_ratio_accuracy(const TrainConfig& base, const BackboneSpec& arch,
                                            const Dataset& data,
                                            const std::vector<double>& p_targets,
                                            const std::vector<std::uint64_t>& seeds,
                                            const Teacher* teacher = nullptr);

}  // namespace rekd
