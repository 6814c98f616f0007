#include "rekd/ops.hpp"

#include <cmath>
#include <string>

namespace rekd {

namespace {

Tape& tape_of(Var v, const char* who) {
  if (!v.valid()) throw std::invalid_argument(std::string(who) + ": invalid var");
  return *v.tape();
}

void check_same_tape(Var a, Var b, const char* who) {
  tape_of(a, who);
  if (a.tape() != b.tape())
    throw std::invalid_argument(std::string(who) + ": vars from different tapes");
}

void check_same_shape(Var a, Var b, const char* who) {
  check_same_tape(a, b, who);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(who) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
}

}  // namespace

Matrix softmax_rows(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0))
    throw std::domain_error("softmax_rows: temperature must be positive, got " +
                            std::to_string(temperature));
  Matrix out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    auto e = ((logits.row(r).array() - m) / temperature).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  return tape_of(a, "add").node(a.value() + b.value(), {a, b}, [](BackwardCtx& c) {
    c.add_in_grad(0, c.out_grad());
    c.add_in_grad(1, c.out_grad());
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  return tape_of(a, "sub").node(a.value() - b.value(), {a, b}, [](BackwardCtx& c) {
    c.add_in_grad(0, c.out_grad());
    c.add_in_grad(1, -c.out_grad());
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  return tape_of(a, "mul").node(a.value().cwiseProduct(b.value()), {a, b},
                                [](BackwardCtx& c) {
                                  c.add_in_grad(0, c.out_grad().cwiseProduct(c.in_value(1)));
                                  c.add_in_grad(1, c.out_grad().cwiseProduct(c.in_value(0)));
                                });
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()));
  return tape_of(a, "matmul").node(a.value() * b.value(), {a, b}, [](BackwardCtx& c) {
    c.add_in_grad(0, c.out_grad() * c.in_value(1).transpose());
    c.add_in_grad(1, c.in_value(0).transpose() * c.out_grad());
  });
}

Var transpose(Var a) {
  return tape_of(a, "transpose").node(a.value().transpose(), {a}, [](BackwardCtx& c) {
    c.add_in_grad(0, c.out_grad().transpose());
  });
}

Var scale(Var a, double c) {
  return tape_of(a, "scale").node(c * a.value(), {a}, [c](BackwardCtx& ctx) {
    ctx.add_in_grad(0, c * ctx.out_grad());
  });
}

Var add_scalar(Var a, double c) {
  return tape_of(a, "add_scalar")
      .node(a.value().array() + c, {a},
            [](BackwardCtx& ctx) { ctx.add_in_grad(0, ctx.out_grad()); });
}

Var tanh(Var a) {
  return tape_of(a, "tanh").node(a.value().array().tanh(), {a}, [](BackwardCtx& c) {
    c.add_in_grad(0, c.out_grad().array() * (1.0 - c.out_value().array().square()));
  });
}

Var log_clamped(Var a) {
  return tape_of(a, "log_clamped")
      .node(a.value().array().max(kProbFloor).log(), {a}, [](BackwardCtx& c) {
        const auto& x = c.in_value(0).array();
        c.add_in_grad(0, (x >= kProbFloor).select(c.out_grad().array() / x, 0.0).matrix());
      });
}

Var inv_sqrt(Var a) {
  if ((a.value().array() <= 0.0).any())
    throw std::domain_error("inv_sqrt: input must be strictly positive");
  return tape_of(a, "inv_sqrt")
      .node(a.value().array().rsqrt(), {a}, [](BackwardCtx& c) {
        // d(x^-1/2)/dx = -1/2 x^-3/2 = -1/2 y^3 with y = x^-1/2
        c.add_in_grad(0, -0.5 * c.out_grad().array() * c.out_value().array().cube());
      });
}

Var row_softmax(Var logits, double temperature) {
  Matrix s = softmax_rows(logits.value(), temperature);
  return tape_of(logits, "row_softmax")
      .node(std::move(s), {logits}, [temperature](BackwardCtx& c) {
        const Matrix& s = c.out_value();
        const Matrix& g = c.out_grad();
        Matrix gz(s.rows(), s.cols());
        for (Index r = 0; r < s.rows(); ++r) {
          const double dot = s.row(r).dot(g.row(r));
          gz.row(r) = (g.row(r).array() - dot) * s.row(r).array() / temperature;
        }
        c.add_in_grad(0, gz);
      });
}

Var row_sum(Var a) {
  return tape_of(a, "row_sum")
      .node(a.value().rowwise().sum(), {a}, [](BackwardCtx& c) {
        c.add_in_grad(0, c.out_grad() * Matrix::Ones(1, c.in_value(0).cols()));
      });
}

Var row_mean(Var a) { return scale(row_sum(a), 1.0 / static_cast<double>(a.cols())); }

Var col_mean(Var a) {
  const double n = static_cast<double>(a.rows());
  return tape_of(a, "col_mean")
      .node(a.value().colwise().mean(), {a}, [n](BackwardCtx& c) {
        c.add_in_grad(0, Matrix::Ones(c.in_value(0).rows(), 1) * (c.out_grad() / n));
      });
}

Var total_sum(Var a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return tape_of(a, "total_sum").node(std::move(v), {a}, [](BackwardCtx& c) {
    c.add_in_grad(0, Matrix::Constant(c.in_value(0).rows(), c.in_value(0).cols(),
                                      c.out_grad()(0, 0)));
  });
}

Var broadcast_row(Var row, Index rows) {
  if (row.rows() != 1) throw std::invalid_argument("broadcast_row: input must be 1xc");
  if (rows < 1) throw std::invalid_argument("broadcast_row: row count must be positive");
  return tape_of(row, "broadcast_row")
      .node(Matrix::Ones(rows, 1) * row.value(), {row}, [](BackwardCtx& c) {
        c.add_in_grad(0, c.out_grad().colwise().sum());
      });
}

Var broadcast_col(Var col, Index cols) {
  if (col.cols() != 1) throw std::invalid_argument("broadcast_col: input must be rx1");
  if (cols < 1) throw std::invalid_argument("broadcast_col: column count must be positive");
  return tape_of(col, "broadcast_col")
      .node(col.value() * Matrix::Ones(1, cols), {col}, [](BackwardCtx& c) {
        c.add_in_grad(0, c.out_grad().rowwise().sum());
      });
}

Var hcat(Var a, Var b) {
  check_same_tape(a, b, "hcat");
  if (a.rows() != b.rows()) throw std::invalid_argument("hcat: row counts disagree");
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  const Index ca = a.cols();
  return tape_of(a, "hcat").node(std::move(v), {a, b}, [ca](BackwardCtx& c) {
    c.add_in_grad(0, c.out_grad().leftCols(ca));
    c.add_in_grad(1, c.out_grad().rightCols(c.out_grad().cols() - ca));
  });
}

Var vcat(Var a, Var b) {
  check_same_tape(a, b, "vcat");
  if (a.cols() != b.cols()) throw std::invalid_argument("vcat: column counts disagree");
  Matrix v(a.rows() + b.rows(), a.cols());
  v << a.value(), b.value();
  const Index ra = a.rows();
  return tape_of(a, "vcat").node(std::move(v), {a, b}, [ra](BackwardCtx& c) {
    c.add_in_grad(0, c.out_grad().topRows(ra));
    c.add_in_grad(1, c.out_grad().bottomRows(c.out_grad().rows() - ra));
  });
}

Var slice_rows(Var a, Index first, Index count) {
  if (first < 0 || count < 1 || first + count > a.rows())
    throw std::invalid_argument("slice_rows: range out of bounds");
  return tape_of(a, "slice_rows")
      .node(a.value().middleRows(first, count), {a}, [first, count](BackwardCtx& c) {
        if (!c.in_needs_grad(0)) return;
        Matrix g = Matrix::Zero(c.in_value(0).rows(), c.in_value(0).cols());
        g.middleRows(first, count) = c.out_grad();
        c.add_in_grad(0, g);
      });
}

Var slice_cols(Var a, Index first, Index count) {
  if (first < 0 || count < 1 || first + count > a.cols())
    throw std::invalid_argument("slice_cols: range out of bounds");
  return tape_of(a, "slice_cols")
      .node(a.value().middleCols(first, count), {a}, [first, count](BackwardCtx& c) {
        if (!c.in_needs_grad(0)) return;
        Matrix g = Matrix::Zero(c.in_value(0).rows(), c.in_value(0).cols());
        g.middleCols(first, count) = c.out_grad();
        c.add_in_grad(0, g);
      });
}

Var pick(Var a, Index r, Index c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols())
    throw std::invalid_argument("pick: index out of bounds");
  Matrix v(1, 1);
  v(0, 0) = a.value()(r, c);
  return tape_of(a, "pick").node(std::move(v), {a}, [r, c](BackwardCtx& ctx) {
    if (!ctx.in_needs_grad(0)) return;
    Matrix g = Matrix::Zero(ctx.in_value(0).rows(), ctx.in_value(0).cols());
    g(r, c) = ctx.out_grad()(0, 0);
    ctx.add_in_grad(0, g);
  });
}

Var mask_rows(Var x, Var mask) {
  check_same_tape(x, mask, "mask_rows");
  if (mask.cols() != 1 || mask.rows() != x.rows())
    throw std::invalid_argument("mask_rows: mask must be " + std::to_string(x.rows()) +
                                "x1, got " + std::to_string(mask.rows()) + "x" +
                                std::to_string(mask.cols()));
  const Matrix& xv = x.value();
  const Matrix& mv = mask.value();
  Matrix out(xv.rows(), xv.cols());
  for (Index l = 0; l < xv.rows(); ++l) {
    const double m = mv(l, 0);
    if (m == 0.0)
      out.row(l).setZero();
    else if (m == 1.0)
      out.row(l) = xv.row(l);
    else
      out.row(l) = m * xv.row(l);
  }
  return tape_of(x, "mask_rows").node(std::move(out), {x, mask}, [](BackwardCtx& c) {
    const Matrix& xv = c.in_value(0);
    const Matrix& mv = c.in_value(1);
    const Matrix& g = c.out_grad();
    if (c.in_needs_grad(0)) {
      Matrix gx(xv.rows(), xv.cols());
      for (Index l = 0; l < xv.rows(); ++l) gx.row(l) = mv(l, 0) * g.row(l);
      c.add_in_grad(0, gx);
    }
    if (c.in_needs_grad(1)) {
      Matrix gm(xv.rows(), 1);
      for (Index l = 0; l < xv.rows(); ++l) gm(l, 0) = g.row(l).dot(xv.row(l));
      c.add_in_grad(1, gm);
    }
  });
}

}  // namespace rekd
