#include "sdgf/autodiff.hpp"

#include <unordered_set>

#include "sdgf/errors.hpp"

namespace sdgf {

namespace {
thread_local bool g_grad_enabled = true;
}

void Node::accumulate(const Tensor& g) {
  if (g.shape() != value.shape()) {
    throw DimensionError("gradient " + to_string(g.shape()) + " does not match value " + to_string(value.shape()) +
                         " in op '" + op + "'");
  }
  if (!has_grad) {
    grad = g;
    has_grad = true;
    return;
  }
  auto dst = grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor& Node::grad_buffer() {
  if (!has_grad) {
    grad = Tensor(value.shape());
    has_grad = true;
  }
  return grad;
}

Var::Var() : node_(std::make_shared<Node>()) {}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->op = "leaf";
}

Tensor Var::grad() const { return node_->has_grad ? node_->grad : Tensor(node_->value.shape()); }

void Var::zero_grad() {
  node_->grad = Tensor();
  node_->has_grad = false;
}

Var make_result(Tensor value, std::string op, std::vector<Var> parents, std::function<void(Node&)> backward) {
  if (!value.all_finite()) throw NumericError("non-finite value produced by op '" + op + "'");
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = std::move(op);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  auto root = loss.node();
  if (root->value.size() != 1) {
    throw DimensionError("backward needs a one-element loss, got " + to_string(root->value.shape()));
  }
  if (root->backward_done) throw StateError("backward already ran on this graph; rebuild it first");
  root->backward_done = true;
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion depth limits.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->accumulate(Tensor(root->value.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->has_grad) node->backward(*node);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace sdgf
