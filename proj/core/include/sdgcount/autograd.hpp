#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sdgcount/tensor.hpp"

namespace sdgcount::ag {

/// One vertex of the reverse-mode tape.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  /// Reads `self.grad` and accumulates into the inputs' gradients.
  std::function<void(Node& self)> backward_fn;

  /// Gradient storage, zero-initialized on first use.
  Tensor& grad_buffer();
};

/// Handle to a tape node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Mutable access for optimizers and checkpoint loading; never call mid-graph.
  Tensor& value_mut() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// Empty tensor until a backward pass reaches this node.
  const Tensor& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = Tensor(); }

  /// Reverse sweep from a scalar (single-element) root with seed gradient 1.
  void backward() const;

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Whether new ops record a backward closure (thread-local).
bool grad_enabled() noexcept;

/// Disables graph recording for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an op result. The backward closure is kept only when grad mode is on
/// and at least one input requires a gradient.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// A constant (non-differentiable) view of `v`'s current value.
inline Var detach(const Var& v) { return Var(v.value(), false); }

}  // namespace sdgcount::ag
