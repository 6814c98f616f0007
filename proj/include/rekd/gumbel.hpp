#pragma once

#include "rekd/ops.hpp"
#include "rekd/rng.hpp"

namespace rekd {

// G = -ln(-ln(u)) elementwise; u is clamped to [kProbFloor, 1 - kProbFloor]
// first so the result is always finite.
Matrix gumbel_from_uniform(const Matrix& u);

// [num_features, 2] of Gumbel(0,1) noise.
Matrix sample_noise(Rng& rng, Index num_features);

// A tape-bound relaxed selection sample: per feature row, a two-way softmax
// over (keep, select) logits perturbed by fixed Gumbel noise.
struct GumbelSample {
  Var logits;       // Z, [L,2]
  Matrix noise;     // G, held constant
  Var pre_softmax;  // Z + G; the distillation loss differentiates through this
  Var soft;         // S = softmax((Z+G)/tau) per row
  double tau = 1.0;
};

GumbelSample gumbel_softmax(Var logits, const Matrix& noise, double tau);

// Hard mask [L,1]. Forward: M_l = 1 iff S_{l,1} > S_{l,0}; an exact tie
// resolves to 0 (not selected). Backward is straight-through: the incoming
// gradient of M_l is passed to S_{l,1} unchanged and S_{l,0} gets none.
Var discretize_st(const GumbelSample& sample);

// Differentiable surrogate S[:,1], used where argmax would defeat a
// finite-difference oracle.
Var soft_mask(const GumbelSample& sample);

// Exponential decay tau_k = tau_init * exp(-gamma * k) with gamma chosen so
// tau reaches tau_final at total_steps. The value is held constant within
// each anneal_every-step window and clamped to tau_final from total_steps on.
class TemperatureScheduler {
 public:
  TemperatureScheduler(double tau_init, double tau_final, long total_steps,
                       long anneal_every);

  double tau_at(long step) const;  // step < 0 is a domain error

  double tau_init() const { return tau_init_; }
  double tau_final() const { return tau_final_; }
  long total_steps() const { return total_steps_; }
  long anneal_every() const { return anneal_every_; }

 private:
  double tau_init_;
  double tau_final_;
  long total_steps_;
  long anneal_every_;
  double gamma_;
};

}  // namespace rekd
