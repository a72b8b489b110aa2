#pragma once

#include <functional>
#include <vector>

#include "ltood/ndcore/tensor.hpp"

namespace ltood::nd {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape
// lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Mode {
  record,    // store backward rules; backward() allowed
  inference  // forward values only
};

// Reverse-mode gradient tape. Nodes are appended in evaluation order, so the
// node list is already a topological order of the graph.
class Tape {
 public:
  // Propagates the adjoint of a node into the adjoints of its inputs.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(Mode mode = Mode::record, bool checked = true)
      : mode_(mode), checked_(checked) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Used by the op implementations.
  Var record(Tensor value, std::vector<int> inputs, BackwardFn backward,
             const char* op_name);

  const Tensor& value(Var v) const;
  // Adjoint of `v` after backward(); zero tensor for nodes that did not
  // receive gradient.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  // Accumulates into the adjoint buffer of node `id`.
  void accumulate(int id, const Tensor& g);
  Tensor& grad_buffer(int id);

  void backward(Var loss);

  bool recording() const { return mode_ == Mode::record; }
  bool checked() const { return checked_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool grad_ready = false;
  };

  Node& node(int id);
  const Node& node(int id) const;

  Mode mode_;
  bool checked_;
  std::vector<Node> nodes_;
};

}  // namespace ltood::nd
