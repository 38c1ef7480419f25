#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "gwa/numerics/tensor.hpp"

namespace gwa {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode differentiation record. Ops append nodes in evaluation order;
// backward() replays their adjoints in exactly the reverse order.
// A tape is single-threaded: use one per worker.
class Tape {
 public:
  // Receives the gradient flowing into a node's output and accumulates into
  // its inputs through Tape::grad_buffer.
  using Adjoint = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  // Appends an op result. The adjoint is kept only when some input needs a
  // gradient. Throws NumericError if the value is not finite.
  Var record(Tensor value, std::vector<std::size_t> inputs, Adjoint adjoint, const char* op);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  // Seeds d(out)/d(out) = 1 for a single-element output and propagates.
  void backward(Var out);

  // Gradient of the last backward() target w.r.t. v; zeros for constants or
  // for values the target does not depend on.
  Tensor grad(Var v) const;

  // Mutable gradient accumulator for node `id`, allocated on first use.
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }

  // Ids of the nodes whose adjoints ran during the last backward(), in run
  // order. Exposed so tests can check the replay order.
  const std::vector<std::size_t>& replay_order() const { return replay_order_; }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    Adjoint adjoint;
    const char* op = "";
    Tensor grad;
  };

  std::vector<Node> nodes_;
  std::vector<std::size_t> replay_order_;
};

}  // namespace gwa
