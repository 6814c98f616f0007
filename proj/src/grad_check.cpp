#include "rekd/grad_check.hpp"

#include <cmath>

namespace rekd {

namespace {

double eval_scalar(const ScalarFn& f, const Matrix& x) {
  Tape tape;
  Var out = f(tape, tape.leaf(x));
  if (out.rows() != 1 || out.cols() != 1)
    throw std::invalid_argument("grad_check: f must return a 1x1 scalar");
  const double v = out.value()(0, 0);
  if (!std::isfinite(v)) throw std::runtime_error("grad_check: f returned a non-finite value");
  return v;
}

}  // namespace

double grad_check(const ScalarFn& f, const Matrix& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step must be positive");

  Tape tape;
  Var vx = tape.leaf(x);
  Var loss = f(tape, vx);
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("grad_check: f must return a 1x1 scalar");
  if (!std::isfinite(loss.value()(0, 0)))
    throw std::runtime_error("grad_check: f returned a non-finite value");
  tape.backward(loss);
  const Matrix analytic = vx.grad();

  double worst = 0.0;
  Matrix probe = x;
  for (Index r = 0; r < x.rows(); ++r)
    for (Index c = 0; c < x.cols(); ++c) {
      const double x0 = x(r, c);
      probe(r, c) = x0 + h;
      const double fp = eval_scalar(f, probe);
      probe(r, c) = x0 - h;
      const double fm = eval_scalar(f, probe);
      probe(r, c) = x0;
      const double fd = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic(r, c) - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
  return worst;
}

}  // namespace rekd
