#include "ltood/ndcore/tape.hpp"

#include "ltood/error.hpp"

namespace ltood::nd {

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (checked_) value.check_finite("leaf");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && recording();
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::vector<int> inputs, BackwardFn backward,
                 const char* op_name) {
  if (checked_) value.check_finite(op_name);
  Node n;
  n.value = std::move(value);
  if (recording()) {
    for (int in : inputs) {
      if (node(in).requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Tape::Node& Tape::node(int id) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw std::out_of_range("tape node id " + std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

const Tape::Node& Tape::node(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw std::out_of_range("tape node id " + std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

const Tensor& Tape::value(Var v) const {
  if (v.tape != this) throw std::invalid_argument("variable from another tape");
  return node(v.id).value;
}

const Tensor& Tape::grad(Var v) const {
  if (v.tape != this) throw std::invalid_argument("variable from another tape");
  const Node& n = node(v.id);
  if (!n.grad_ready) {
    throw std::logic_error("gradient requested before backward()");
  }
  return n.grad;
}

bool Tape::requires_grad(Var v) const { return node(v.id).requires_grad; }

Tensor& Tape::grad_buffer(int id) { return node(id).grad; }

void Tape::accumulate(int id, const Tensor& g) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  if (g.numel() != n.grad.numel()) {
    throw ShapeError("adjoint shape " + shape_str(g.shape()) +
                     " does not match node " + shape_str(n.value.shape()));
  }
  auto dst = n.grad.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  if (!recording()) throw std::logic_error("backward() on an inference tape");
  if (loss.tape != this) throw std::invalid_argument("loss from another tape");
  const Node& root = node(loss.id);
  if (root.value.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " +
                     shape_str(root.value.shape()));
  }
  for (auto& n : nodes_) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_ready = true;
  }
  if (!root.requires_grad) return;
  node(loss.id).grad[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.backward) continue;
    // Copy: backward may touch other nodes' buffers but never this one.
    const Tensor g = n.grad;
    n.backward(*this, g);
  }
}

}  // namespace ltood::nd
