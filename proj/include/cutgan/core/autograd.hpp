#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cutgan/core/tensor.hpp"

namespace cutgan {

// Reverse-mode autodiff over a dynamically built graph. Var is a cheap handle
// to a graph node; ops (see ops.hpp) create nodes whose backward closures
// accumulate into parent gradients.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;          // allocated lazily on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents

  void accum_grad(const Tensor<T>& g) {
    if (!grad.defined()) {
      grad = Tensor<T>(value.shape());
    }
    grad.add_(g);
  }

  void zero_grad() { grad = Tensor<T>(); }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  static Var leaf(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }
  static Var scalar(T v) { return constant(Tensor<T>::scalar(v)); }

  bool defined() const { return node_ != nullptr; }
  Node<T>* get() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& ptr() const { return node_; }

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }

  // Same value, cut off from the graph.
  Var detach() const { return constant(node_->value); }

  T item() const { return node_->value.item(); }

 private:
  std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <typename T>
void topo_visit(Node<T>* n, std::unordered_set<Node<T>*>& seen, std::vector<Node<T>*>& order) {
  // Iterative DFS; graphs get deep (hundreds of layers x steps).
  struct Frame {
    Node<T>* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  if (seen.count(n)) return;
  stack.push_back({n, 0});
  seen.insert(n);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node<T>* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Backpropagate from a scalar root. Gradients accumulate into every node with
// requires_grad reachable from the root; leaf grads persist until zeroed.
template <typename T>
void backward(const Var<T>& root) {
  check(root.value().numel() == 1, "backward: root must be scalar");
  if (!root.requires_grad()) return;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> order;
  detail::topo_visit(root.get(), seen, order);
  root.get()->accum_grad(Tensor<T>::scalar(static_cast<T>(1)));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->grad.defined()) n->backward_fn(*n);
  }
  // Interior node grads are only needed during the sweep; free them so the
  // graph (still referenced by leaves' optimizers or callers) sheds memory.
  for (Node<T>* n : order) {
    if (n->backward_fn) n->zero_grad();
  }
}

// Helper for op implementations.
template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  bool rg = false;
  for (auto& p : parents) {
    rg = rg || p.requires_grad();
    n->parents.push_back(p.ptr());
  }
  n->requires_grad = rg;
  if (rg) n->backward_fn = std::move(backward_fn);
  return Var<T>(std::move(n));
}

}  // namespace cutgan
