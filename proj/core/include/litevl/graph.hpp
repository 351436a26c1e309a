#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "litevl/tensor.hpp"

namespace litevl {

/// Global forward-only switch. Single-threaded by design, so a plain flag.
struct GradMode {
  static bool& flag() {
    static bool enabled = true;
    return enabled;
  }
  static bool enabled() { return flag(); }
};

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(GradMode::flag()) { GradMode::flag() = false; }
  ~NoGradGuard() { GradMode::flag() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class Real>
struct Node {
  Tensor<Real> value;
  Tensor<Real> grad;  // empty until first touched in a backward pass
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into inputs
  const char* op = "leaf";

  Tensor<Real>& ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor<Real>(value.shape());
    return grad;
  }

  void zero_grad() {
    if (grad.numel() != 0) grad.fill(Real(0));
  }
};

/// Handle to a graph node. Copies share the node.
template <class Real>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<Real>> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }

  const Tensor<Real>& value() const { return require()->value; }
  const Tensor<Real>& grad() const {
    const auto* n = require();
    if (n->grad.numel() != n->value.numel()) {
      throw std::runtime_error("grad requested before backward reached this node");
    }
    return n->grad;
  }
  bool requires_grad() const { return require()->requires_grad; }

  const Shape& shape() const { return value().shape(); }

  std::shared_ptr<Node<Real>>& node() { return node_; }
  const std::shared_ptr<Node<Real>>& node() const { return node_; }

 private:
  Node<Real>* require() const {
    if (!node_) throw std::runtime_error("use of undefined Var");
    return node_.get();
  }

  std::shared_ptr<Node<Real>> node_;
};

template <class Real>
Var<Real> make_leaf(Tensor<Real> value, bool requires_grad, const char* name = "leaf") {
  if (!value.all_finite()) {
    throw std::runtime_error(std::string("non-finite value in leaf '") + name + "'");
  }
  auto n = std::make_shared<Node<Real>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad && GradMode::enabled();
  n->op = name;
  return Var<Real>(std::move(n));
}

template <class Real>
Var<Real> make_param(Tensor<Real> value, const char* name = "param") {
  return make_leaf(std::move(value), true, name);
}

template <class Real>
Var<Real> make_const(Tensor<Real> value, const char* name = "const") {
  return make_leaf(std::move(value), false, name);
}

/// Builds an op node. Inputs are recorded and the backward closure kept only
/// when some input needs gradients and grad mode is on; otherwise the node is
/// forward-only and the closure is dropped.
template <class Real>
Var<Real> make_op(const char* op, Tensor<Real> value,
                  std::vector<std::shared_ptr<Node<Real>>> inputs,
                  std::function<void(Node<Real>&)> backward_fn) {
  if (!value.all_finite()) {
    throw std::runtime_error(std::string("non-finite value produced by op '") + op + "'");
  }
  auto n = std::make_shared<Node<Real>>();
  n->value = std::move(value);
  n->op = op;
  bool need = false;
  if (GradMode::enabled()) {
    for (const auto& in : inputs) {
      if (in && in->requires_grad) {
        need = true;
        break;
      }
    }
  }
  if (need) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
  }
  return Var<Real>(std::move(n));
}

/// Reverse-mode sweep from a scalar root. Each node runs once, after all of
/// its consumers, via reverse post-order over the requires-grad subgraph.
template <class Real>
void backward(const Var<Real>& root) {
  auto* r = root.node().get();
  if (!r) throw std::runtime_error("backward: undefined root");
  if (r->value.numel() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got " +
                                shape_str(r->value.shape()));
  }
  if (!r->requires_grad) {
    throw std::invalid_argument("backward: root does not require grad");
  }

  std::vector<Node<Real>*> order;
  std::unordered_set<Node<Real>*> seen;
  std::vector<std::pair<Node<Real>*, bool>> stack;
  stack.emplace_back(r, false);
  while (!stack.empty()) {
    auto [n, expanded] = stack.back();
    stack.pop_back();
    if (expanded) {
      order.push_back(n);
      continue;
    }
    if (seen.count(n)) continue;
    seen.insert(n);
    stack.emplace_back(n, true);
    for (const auto& in : n->inputs) {
      if (in && in->requires_grad && !seen.count(in.get())) stack.emplace_back(in.get(), false);
    }
  }

  r->ensure_grad();
  r->grad[0] = Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Real>* n = *it;
    if (n->grad.numel() != n->value.numel()) continue;  // unreachable from root's grad flow
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace litevl
