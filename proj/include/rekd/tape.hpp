#pragma once

#include "rekd/types.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace rekd {

class Tape;
class BackwardCtx;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the owning
// tape is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Gradient of the backward() target with respect to this node. Only valid
  // after backward() and only for nodes that track gradients.
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

using BackwardFn = std::function<void(BackwardCtx&)>;

// Record of executed primitive operations. Recording order is execution
// order, which is always topological, so backward() is a single reverse scan
// that visits each operation exactly once. Single-threaded by design.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input. Always receives a (possibly zero) gradient on
  // backward, even when unreachable from the loss.
  Var leaf(Matrix value);

  // Non-differentiable value; backward never visits it.
  Var constant(Matrix value);

  // Operation node. `backward` gets the node's output gradient and
  // accumulates into its inputs; it is dropped when no input tracks
  // gradients.
  Var node(Matrix value, std::vector<Var> inputs, BackwardFn backward);

  // Reverse replay seeded at `loss`, which must be 1x1. One call per tape.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  bool tracks_grad(Var v) const;
  bool backward_done() const { return backward_done_; }
  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  friend class BackwardCtx;

  struct NodeRec {
    Matrix value;
    Matrix grad;  // allocated at backward() time for tracked nodes
    std::vector<int> inputs;
    BackwardFn backward;
    bool needs_grad = false;
  };

  int check(Var v, const char* who) const;

  std::vector<NodeRec> nodes_;
  bool backward_done_ = false;
};

// View of one node while the tape replays backward.
class BackwardCtx {
 public:
  const Matrix& out_grad() const { return self_->grad; }
  const Matrix& out_value() const { return self_->value; }
  int num_inputs() const { return static_cast<int>(self_->inputs.size()); }
  const Matrix& in_value(int k) const { return tape_->nodes_[self_->inputs[k]].value; }
  bool in_needs_grad(int k) const { return tape_->nodes_[self_->inputs[k]].needs_grad; }

  // Accumulates into input k's gradient; no-op when that input is constant.
  // Takes any Eigen expression of the right shape.
  template <typename Derived>
  void add_in_grad(int k, const Eigen::MatrixBase<Derived>& g) {
    auto& rec = tape_->nodes_[self_->inputs[k]];
    if (rec.needs_grad) rec.grad += g;
  }
  template <typename Derived>
  void add_in_grad(int k, const Eigen::ArrayBase<Derived>& g) {
    auto& rec = tape_->nodes_[self_->inputs[k]];
    if (rec.needs_grad) rec.grad.array() += g;
  }

 private:
  friend class Tape;
  BackwardCtx(Tape* tape, Tape::NodeRec* self) : tape_(tape), self_(self) {}

  Tape* tape_;
  Tape::NodeRec* self_;
};

}  // namespace rekd
