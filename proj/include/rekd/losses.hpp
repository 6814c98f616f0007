#pragma once

#include "rekd/gumbel.hpp"

namespace rekd {

struct LossWeights {
  double lambda_select = 0.5;  // weight on the selection budget term
  double lambda_r = 0.5;       // weight on the rationale distillation term
  double alpha = 0.3;          // mix between the task objective and distillation
  double p_target = 0.15;      // budgeted fraction of selected features

  void validate() const;  // ConfigError naming the offending field
};

// Scalar loss components of one batch. The combination fields are produced
// by the same arithmetic the tape uses, so consistent() holds exactly.
struct LossBreakdown {
  double pred = 0.0;
  double select = 0.0;
  double re = 0.0;
  double kd_r = 0.0;
  double kd_y = 0.0;
  double kd = 0.0;
  double total = 0.0;

  bool consistent(const LossWeights& w, double tau, double tol = 1e-10) const;
};

// (sum(M) - L * p_target)^2. Quadratic budget penalty on how many features a
// mask keeps; gradients reach the selection logits through the
// straight-through estimator.
Var selection_loss(Var mask, Index num_features, double p_target);

// -ln(softmax(Q)[label]) with the probability floored at kProbFloor.
Var task_ce(Var pred_logits, Index label);

// pred + lambda_select * select.
Var re_loss(Var pred, Var select, const LossWeights& w);

// Sum over feature rows of KL(teacher_soft_row || student_soft_row), teacher
// held constant. Differentiates through the student's pre-softmax logits so
// the gradient is exactly (soft_student - teacher_soft) / tau even where the
// softmax saturates.
Var kd_rationale(const Matrix& teacher_soft, const GumbelSample& student);

// KL(softmax(Q_T / tau) || softmax(Q_S / tau)), teacher held constant.
Var kd_pred(const Matrix& teacher_logits, Var student_logits, double tau);

// lambda_r * kd_r + tau^2 * kd_y. The tau^2 factor compensates the 1/tau in
// the prediction-KL gradient; the rationale term is left unscaled because
// its gradient already matches the task gradient's temperature scaling.
Var kd_combined(Var kd_r, Var kd_y, double tau, const LossWeights& w);

// alpha * re + (1 - alpha) * kd.
Var rekd_total(Var re, Var kd, const LossWeights& w);

// Shared fused primitive: sum over rows of KL(target_row || softmax(logits
// row / tau)). Forward goes through log-sum-exp; backward adds
// (softmax(logits/tau) - target) / tau.
Var kl_vs_softmax(const Matrix& target_probs, Var logits, double tau);

// Value-level KL of row-stochastic matrices with probabilities floored at
// kProbFloor. Oracle and reporting helper; carries no gradient.
double kl_rows(const Matrix& teacher_probs, const Matrix& student_probs);

}  // namespace rekd
