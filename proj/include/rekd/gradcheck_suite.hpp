#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rekd {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  bool all_passed = true;
};

// Finite-difference verification of every loss composite against the tape
// gradients, on both backbones, differentiating with respect to generator
// weights, predictor weights, and raw logits. Composites that would pass
// through the hard mask run in soft-selection mode, where the objective is
// differentiable. tol bounds the max relative error per entry.
GradCheckReport run_gradcheck_suite(double tol = 1e-4);

struct IdentityEntry {
  double tau = 0.0;
  // Tape gradient of the rationale-distillation term versus
  // (S_student - S_teacher) / tau, elementwise absolute error.
  double max_abs_err = 0.0;
  // tau^2-scaled variant's gradient norm versus tau * ||S_student -
  // S_teacher||, relative error.
  double max_ratio_err = 0.0;
  int pairs = 0;
};

std::vector<IdentityEntry> run_identity_checks(const std::vector<double>& taus, int pairs,
                                               std::uint64_t seed);

}  // namespace rekd
