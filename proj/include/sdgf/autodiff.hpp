#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sdgf/tensor.hpp"

namespace sdgf {

/// One recorded value in a computation graph. `backward` reads `grad` and
/// accumulates into the parents' gradients.
struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  bool requires_grad = false;
  bool backward_done = false;
  std::string op;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Adds `g` into `grad`, allocating it on first use.
  void accumulate(const Tensor& g);
  /// Returns the gradient buffer, allocating a zero buffer on first use.
  Tensor& grad_buffer();
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var();
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  std::size_t rank() const { return node_->value.rank(); }
  bool requires_grad() const { return node_->requires_grad; }

  bool has_grad() const { return node_->has_grad; }
  /// Gradient, or zeros of the value's shape if none has been accumulated.
  Tensor grad() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Records a new node. If no parent requires gradients (or recording is
/// disabled) the node is a constant and `backward` is dropped.
Var make_result(Tensor value, std::string op, std::vector<Var> parents, std::function<void(Node&)> backward);

/// Reverse-mode sweep from a one-element `loss`. Each reachable node's
/// backward rule runs exactly once, in reverse topological order.
void backward(const Var& loss);

/// Whether ops currently record graph edges.
bool grad_enabled();

/// Disables graph recording within a scope (evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace sdgf
