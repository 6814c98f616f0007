#pragma once

#include "rekd/tape.hpp"

namespace rekd {

// Row-wise softmax with temperature, max-subtracted for stability. Rows sum
// to 1 even for logit magnitudes around 1e3. temperature must be positive.
Matrix softmax_rows(const Matrix& logits, double temperature);

// Elementwise and structural primitives. Shapes are checked; mismatches and
// cross-tape arguments throw std::invalid_argument.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // Hadamard
Var matmul(Var a, Var b);
Var transpose(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var tanh(Var a);
// ln(max(x, kProbFloor)); slope is zero below the floor.
Var log_clamped(Var a);
// Elementwise x^{-1/2}; requires strictly positive entries.
Var inv_sqrt(Var a);
Var row_softmax(Var logits, double temperature);
Var row_sum(Var a);               // [r,c] -> [r,1]
Var row_mean(Var a);              // [r,c] -> [r,1]
Var col_mean(Var a);              // [r,c] -> [1,c]
Var total_sum(Var a);             // [r,c] -> [1,1]
Var broadcast_row(Var row, Index rows);  // [1,c] -> [rows,c]
Var broadcast_col(Var col, Index cols);  // [r,1] -> [r,cols]
Var hcat(Var a, Var b);
Var vcat(Var a, Var b);
Var slice_rows(Var a, Index first, Index count);
Var slice_cols(Var a, Index first, Index count);
Var pick(Var a, Index r, Index c);  // one entry as [1,1]

// Row l of x copied when mask(l)==1, exactly zeroed when mask(l)==0, scaled
// otherwise. The copy/zero split (rather than multiplying by 0 or 1) makes
// the output of dropped rows bit-independent of their input. Gradients flow
// to both x and mask.
Var mask_rows(Var x, Var mask);

}  // namespace rekd
