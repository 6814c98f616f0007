#pragma once

#include "rekd/ops.hpp"

#include <functional>

namespace rekd {

// Builds a scalar-valued function of one matrix input on a fresh tape. Must
// be deterministic: any randomness has to be captured as fixed values.
using ScalarFn = std::function<Var(Tape&, Var)>;

// Compares reverse-mode gradients of f at x against central finite
// differences with step h, coordinate by coordinate. Returns
// max_i |analytic_i - fd_i| / max(1, |fd_i|). Throws std::runtime_error when
// f produces a non-finite value at or near x.
double grad_check(const ScalarFn& f, const Matrix& x, double h = 1e-5);

}  // namespace rekd
