#include "rekd/tape.hpp"

#include <string>

namespace rekd {

const Matrix& Var::value() const {
  if (!valid()) throw std::logic_error("Var: default-constructed handle");
  return tape_->value(*this);
}

const Matrix& Var::grad() const {
  if (!valid()) throw std::logic_error("Var: default-constructed handle");
  return tape_->grad(*this);
}

int Tape::check(Var v, const char* who) const {
  if (!v.valid()) throw std::invalid_argument(std::string(who) + ": invalid var");
  if (v.tape_ != this)
    throw std::invalid_argument(std::string(who) + ": var belongs to a different tape");
  if (v.id_ < 0 || v.id_ >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument(std::string(who) + ": var id out of range");
  return v.id_;
}

Var Tape::leaf(Matrix value) {
  NodeRec rec;
  rec.value = std::move(value);
  rec.needs_grad = true;
  nodes_.push_back(std::move(rec));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  NodeRec rec;
  rec.value = std::move(value);
  nodes_.push_back(std::move(rec));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::node(Matrix value, std::vector<Var> inputs, BackwardFn backward) {
  NodeRec rec;
  rec.value = std::move(value);
  rec.inputs.reserve(inputs.size());
  bool any = false;
  for (const Var& v : inputs) {
    int id = check(v, "Tape::node");
    rec.inputs.push_back(id);
    any = any || nodes_[id].needs_grad;
  }
  rec.needs_grad = any;
  if (any) rec.backward = std::move(backward);
  nodes_.push_back(std::move(rec));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(Var loss) {
  const int lid = check(loss, "Tape::backward");
  if (backward_done_) throw std::logic_error("Tape::backward: tape already replayed");
  const NodeRec& ln = nodes_[lid];
  if (ln.value.rows() != 1 || ln.value.cols() != 1)
    throw std::invalid_argument("Tape::backward: loss must be a 1x1 scalar, got " +
                                std::to_string(ln.value.rows()) + "x" +
                                std::to_string(ln.value.cols()));
  backward_done_ = true;
  for (auto& n : nodes_)
    if (n.needs_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  if (!nodes_[lid].needs_grad) return;  // loss is a pure constant; leaves keep zero grads
  nodes_[lid].grad(0, 0) = 1.0;
  // Nodes recorded after the loss cannot be its ancestors; nodes before it
  // are visited in exact reverse execution order, once each.
  for (int i = lid; i >= 0; --i) {
    NodeRec& n = nodes_[i];
    if (!n.needs_grad || !n.backward) continue;
    BackwardCtx ctx(this, &n);
    n.backward(ctx);
  }
}

const Matrix& Tape::value(Var v) const { return nodes_[check(v, "Tape::value")].value; }

const Matrix& Tape::grad(Var v) const {
  const NodeRec& n = nodes_[check(v, "Tape::grad")];
  if (!n.needs_grad)
    throw std::logic_error("Tape::grad: no gradient tracked for a constant node");
  if (!backward_done_) throw std::logic_error("Tape::grad: backward has not run");
  return n.grad;
}

bool Tape::tracks_grad(Var v) const { return nodes_[check(v, "Tape::tracks_grad")].needs_grad; }

}  // namespace rekd
