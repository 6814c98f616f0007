#pragma once

#include "rekd/data.hpp"
#include "rekd/models.hpp"

#include <optional>
#include <vector>

namespace rekd {

struct EvalReport {
  double accuracy = 0.0;
  double rationale_ratio_mean = 0.0;
  double rationale_ratio_std = 0.0;
  // Micro-aggregated recovery of the planted signal positions, present only
  // when every sample carries a true mask. f1 is the harmonic mean of the
  // reported precision and recall.
  std::optional<double> recovery_precision, recovery_recall, recovery_f1;
  std::vector<double> per_class_accuracy;
};

struct EvalOptions {
  double tau_eval = 0.1;
  // Default is noise-free selection (G = 0), which makes evaluation a pure
  // function of model and data. Sampled mode draws fresh Gumbel noise.
  bool sampled = false;
  std::uint64_t sample_seed = 0;
};

// generator == nullptr evaluates the predictor on the full input (mask of
// ones). Neither net is modified. Empty sample sets are an error.
EvalReport evaluate(const GeneratorNet* generator, const PredictorNet& predictor,
                    const std::vector<Sample>& samples, const EvalOptions& opts = {});

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Precision/recall/f1 of a predicted mask against the true one. An empty
// selection scores precision 0.
Prf recovery_prf(const std::vector<std::uint8_t>& mask,
                 const std::vector<std::uint8_t>& true_mask);

}  // namespace rekd
