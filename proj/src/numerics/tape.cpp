#include "gwa/numerics/tape.hpp"

#include <string>

#include "gwa/error.hpp"

namespace gwa {

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  require_finite(value, "constant");
  nodes_.push_back(Node{std::move(value), false, {}, {}, "constant", {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  require_finite(value, "variable");
  nodes_.push_back(Node{std::move(value), true, {}, {}, "variable", {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Adjoint adjoint, const char* op) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite output from ") + op);
  bool needs = false;
  for (std::size_t id : inputs) needs = needs || nodes_.at(id).requires_grad;
  Node node{std::move(value), needs, {}, {}, op, {}};
  if (needs) {
    node.inputs = std::move(inputs);
    node.adjoint = std::move(adjoint);
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var out) {
  if (out.tape != this) throw ContractError("backward() on a variable from another tape");
  if (value(out).size() != 1) throw DimensionError("backward() needs a single-element output");
  for (Node& n : nodes_) n.grad = Tensor();
  replay_order_.clear();
  if (!nodes_[out.id].requires_grad) return;
  grad_buffer(out.id)[0] = 1.0;
  for (std::size_t id = out.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.adjoint || n.grad.size() == 0) continue;
    if (!n.grad.all_finite()) throw NumericError(std::string("non-finite gradient at ") + n.op);
    replay_order_.push_back(id);
    // Copied: the adjoint may allocate grad buffers and reallocate nodes_.
    const Tensor g = n.grad;
    n.adjoint(*this, g);
  }
  for (const Node& n : nodes_) {
    if (n.grad.size() && !n.grad.all_finite()) throw NumericError("non-finite gradient");
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() == n.value.size() && n.grad.shape() == n.value.shape()) return n.grad;
  return Tensor(n.value.shape());
}

}  // namespace gwa
