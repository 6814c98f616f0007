#include "rekd/gumbel.hpp"

#include <cmath>
#include <string>

namespace rekd {

Matrix gumbel_from_uniform(const Matrix& u) {
  auto clamped = u.array().max(kProbFloor).min(1.0 - kProbFloor);
  return -(-clamped.log()).log();
}

Matrix sample_noise(Rng& rng, Index num_features) {
  if (num_features < 1)
    throw std::invalid_argument("sample_noise: need at least one feature, got " +
                                std::to_string(num_features));
  return gumbel_from_uniform(uniform_matrix(rng, num_features, 2));
}

GumbelSample gumbel_softmax(Var logits, const Matrix& noise, double tau) {
  if (!(tau > 0.0))
    throw std::domain_error("gumbel_softmax: tau must be positive, got " +
                            std::to_string(tau));
  if (logits.cols() != 2)
    throw std::invalid_argument("gumbel_softmax: logits must be Lx2");
  if (noise.rows() != logits.rows() || noise.cols() != 2)
    throw std::invalid_argument("gumbel_softmax: noise shape must match logits");
  GumbelSample s;
  s.logits = logits;
  s.noise = noise;
  s.pre_softmax = add(logits, logits.tape()->constant(noise));
  s.soft = row_softmax(s.pre_softmax, tau);
  s.tau = tau;
  return s;
}

Var discretize_st(const GumbelSample& sample) {
  const Matrix& s = sample.soft.value();
  Matrix m(s.rows(), 1);
  for (Index l = 0; l < s.rows(); ++l) m(l, 0) = s(l, 1) > s(l, 0) ? 1.0 : 0.0;
  return sample.soft.tape()->node(std::move(m), {sample.soft}, [](BackwardCtx& c) {
    if (!c.in_needs_grad(0)) return;
    Matrix g = Matrix::Zero(c.in_value(0).rows(), 2);
    g.col(1) = c.out_grad().col(0);
    c.add_in_grad(0, g);
  });
}

Var soft_mask(const GumbelSample& sample) { return slice_cols(sample.soft, 1, 1); }

TemperatureScheduler::TemperatureScheduler(double tau_init, double tau_final,
                                           long total_steps, long anneal_every)
    : tau_init_(tau_init),
      tau_final_(tau_final),
      total_steps_(total_steps),
      anneal_every_(anneal_every) {
  if (!(tau_final > 0.0))
    throw std::domain_error("TemperatureScheduler: tau_final must be positive");
  if (!(tau_init >= tau_final))
    throw std::domain_error("TemperatureScheduler: tau_init must be >= tau_final");
  if (total_steps < 1)
    throw std::domain_error("TemperatureScheduler: total_steps must be positive");
  if (anneal_every < 1)
    throw std::domain_error("TemperatureScheduler: anneal_every must be positive");
  gamma_ = std::log(tau_init_ / tau_final_) / static_cast<double>(total_steps_);
}

double TemperatureScheduler::tau_at(long step) const {
  if (step < 0)
    throw std::domain_error("TemperatureScheduler: negative step " + std::to_string(step));
  if (step >= total_steps_) return tau_final_;
  const long plateau = (step / anneal_every_) * anneal_every_;
  if (plateau == 0) return tau_init_;
  return tau_init_ * std::exp(-gamma_ * static_cast<double>(plateau));
}

}  // namespace rekd
