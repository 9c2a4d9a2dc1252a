#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/nn/tensor.hpp"

namespace mqs::nn {

// Reverse-mode autodiff tape. Nodes are appended during the forward pass and
// visited in reverse creation order on backward(), which is a valid
// topological order because an op's parents always precede it.
//
// With gradients disabled (set_grad_enabled(false)) ops record values only;
// nothing built in that window can receive a gradient, which is how the
// frozen key-side forwards stay out of the optimizer's reach.
template <typename T>
class Tape {
 public:
  using MatT = Mat<T>;

  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

  // Leaf holding an independent value (parameter or input constant).
  int leaf(MatT value, bool requires_grad) {
    return add_node(std::move(value), requires_grad && grad_enabled_, nullptr);
  }

  int constant(MatT value) { return leaf(std::move(value), false); }

  // Op node. requires_grad is forced off while gradients are disabled, and
  // the backward closure is dropped when no parent needs a gradient.
  int push(MatT value, bool any_parent_requires_grad,
           std::function<void(Tape&)> backprop) {
    const bool rg = grad_enabled_ && any_parent_requires_grad;
    return add_node(std::move(value), rg, rg ? std::move(backprop) : nullptr);
  }

  const MatT& value(int id) const { return node(id).value; }

  bool requires_grad(int id) const { return node(id).requires_grad; }

  // Gradient accumulator for use inside backward closures; allocates a zero
  // matrix on first touch.
  MatT& grad_ref(int id) {
    Node& n = node(id);
    if (!n.grad_touched) {
      n.grad = MatT::Zero(n.value.rows(), n.value.cols());
      n.grad_touched = true;
    }
    return n.grad;
  }

  bool grad_touched(int id) const { return node(id).grad_touched; }

  // Gradient of the last backward()'s root with respect to node `id`.
  // Untouched nodes (constants, frozen branches) read as exact zeros.
  MatT grad(int id) const {
    MQS_CHECK(ran_backward_, UsageError,
              "Tape::grad: no gradients available; run backward() first");
    const Node& n = node(id);
    if (!n.grad_touched) return MatT::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  // Backpropagates from a scalar root. One backward per tape.
  void backward(int root) {
    MQS_CHECK(!ran_backward_, StructuralError,
              "Tape::backward: already run; clear() the tape first");
    const Node& r = node(root);
    MQS_CHECK(r.value.rows() == 1 && r.value.cols() == 1, StructuralError,
              "Tape::backward: root must be a 1x1 scalar");
    ran_backward_ = true;
    if (!r.requires_grad) return;  // nothing trainable feeds the root
    grad_ref(root)(0, 0) = T(1);
    for (int id = root; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad_touched && n.backprop) n.backprop(*this);
    }
  }

  void clear() {
    nodes_.clear();
    ran_backward_ = false;
    grad_enabled_ = true;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    MatT value;
    MatT grad;
    bool requires_grad = false;
    bool grad_touched = false;
    std::function<void(Tape&)> backprop;
  };

  int add_node(MatT value, bool requires_grad, std::function<void(Tape&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Node& node(int id) {
    MQS_CHECK(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), StructuralError,
              "Tape: node id out of range");
    return nodes_[static_cast<std::size_t>(id)];
  }
  const Node& node(int id) const {
    MQS_CHECK(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), StructuralError,
              "Tape: node id out of range");
    return nodes_[static_cast<std::size_t>(id)];
  }

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  bool ran_backward_ = false;
};

}  // namespace mqs::nn
