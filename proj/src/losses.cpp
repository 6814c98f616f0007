#include "rekd/losses.hpp"

#include <cmath>
#include <string>

namespace rekd {

namespace {

void check_probs_shape(const Matrix& t, Index rows, Index cols, const char* who) {
  if (t.rows() != rows || t.cols() != cols)
    throw std::invalid_argument(std::string(who) + ": target shape " +
                                std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                                " does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda_select >= 0.0)) throw ConfigError("lambda_select must be >= 0");
  if (!(lambda_r >= 0.0)) throw ConfigError("lambda_r must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  if (!(p_target >= 0.0 && p_target <= 1.0))
    throw ConfigError("p_target must lie in [0, 1], got " + std::to_string(p_target));
}

bool LossBreakdown::consistent(const LossWeights& w, double tau, double tol) const {
  const double re_c = pred + w.lambda_select * select;
  const double kd_c = w.lambda_r * kd_r + tau * tau * kd_y;
  const double total_c = w.alpha * re_c + (1.0 - w.alpha) * kd_c;
  return std::abs(re - re_c) <= tol && std::abs(kd - kd_c) <= tol &&
         std::abs(total - total_c) <= tol;
}

Var selection_loss(Var mask, Index num_features, double p_target) {
  if (!(p_target >= 0.0 && p_target <= 1.0))
    throw ConfigError("selection_loss: p_target must lie in [0, 1]");
  if (mask.cols() != 1 || mask.rows() != num_features)
    throw std::invalid_argument("selection_loss: mask must be " +
                                std::to_string(num_features) + "x1");
  Var d = add_scalar(total_sum(mask), -static_cast<double>(num_features) * p_target);
  return mul(d, d);
}

Var task_ce(Var pred_logits, Index label) {
  if (pred_logits.rows() != 1)
    throw std::invalid_argument("task_ce: logits must be a 1xC row");
  if (label < 0 || label >= pred_logits.cols())
    throw std::invalid_argument("task_ce: label " + std::to_string(label) +
                                " out of range for C=" + std::to_string(pred_logits.cols()));
  Var p = row_softmax(pred_logits, 1.0);
  return scale(log_clamped(pick(p, 0, label)), -1.0);
}

Var re_loss(Var pred, Var select, const LossWeights& w) {
  return add(pred, scale(select, w.lambda_select));
}

Var kl_vs_softmax(const Matrix& target, Var logits, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("kl_vs_softmax: tau must be positive");
  check_probs_shape(target, logits.rows(), logits.cols(), "kl_vs_softmax");
  const Matrix& z = logits.value();
  Matrix soft(z.rows(), z.cols());
  double total = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    auto a = (z.row(r).array() - m) / tau;
    const double lse = std::log(a.exp().sum());
    soft.row(r) = (a - lse).exp();
    for (Index c = 0; c < z.cols(); ++c) {
      const double t = target(r, c);
      if (t > 0.0)
        total += t * (std::log(std::max(t, kProbFloor)) - (a(c) - lse));
    }
  }
  Matrix v(1, 1);
  v(0, 0) = total;
  return logits.tape()->node(std::move(v), {logits},
                             [target, soft, tau](BackwardCtx& c) {
                               c.add_in_grad(0, (c.out_grad()(0, 0) / tau) * (soft - target));
                             });
}

Var kd_rationale(const Matrix& teacher_soft, const GumbelSample& student) {
  return kl_vs_softmax(teacher_soft, student.pre_softmax, student.tau);
}

Var kd_pred(const Matrix& teacher_logits, Var student_logits, double tau) {
  check_probs_shape(teacher_logits, student_logits.rows(), student_logits.cols(), "kd_pred");
  return kl_vs_softmax(softmax_rows(teacher_logits, tau), student_logits, tau);
}

Var kd_combined(Var kd_r, Var kd_y, double tau, const LossWeights& w) {
  if (!(tau > 0.0)) throw std::domain_error("kd_combined: tau must be positive");
  return add(scale(kd_r, w.lambda_r), scale(kd_y, tau * tau));
}

Var rekd_total(Var re, Var kd, const LossWeights& w) {
  return add(scale(re, w.alpha), scale(kd, 1.0 - w.alpha));
}

double kl_rows(const Matrix& teacher_probs, const Matrix& student_probs) {
  if (teacher_probs.rows() != student_probs.rows() ||
      teacher_probs.cols() != student_probs.cols())
    throw std::invalid_argument("kl_rows: shape mismatch");
  double total = 0.0;
  for (Index r = 0; r < teacher_probs.rows(); ++r)
    for (Index c = 0; c < teacher_probs.cols(); ++c) {
      const double t = teacher_probs(r, c);
      if (t > 0.0)
        total += t * (std::log(std::max(t, kProbFloor)) -
                      std::log(std::max(student_probs(r, c), kProbFloor)));
    }
  return total;
}

}  // namespace rekd
