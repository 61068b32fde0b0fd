#pragma once

// Dense row-major tensors with reverse-mode differentiation.
//
// A Tensor is a handle to a graph node. Copying the handle shares the node
// (and therefore data and gradient); use clone() for an independent copy.
// Every op that sees at least one input with requires_grad records a
// backward closure on its result; backward() walks the recorded graph in
// reverse topological order and accumulates into each reachable node.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "arousal/core/error.hpp"

namespace arousal::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

template <class S>
struct Node {
  Shape shape;
  std::vector<S> data;
  std::vector<S> grad;  // empty == absent
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  S* grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), S{0});
    return grad.data();
  }
};

template <class S>
class Tensor {
 public:
  using value_type = S;

  Tensor() : node_(std::make_shared<Node<S>>()) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.node_->data.assign(numel_of(shape), S{0});
    t.node_->shape = std::move(shape);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(Shape shape, S value, bool requires_grad = false) {
    auto t = zeros(std::move(shape), requires_grad);
    std::fill(t.node_->data.begin(), t.node_->data.end(), value);
    return t;
  }

  static Tensor from(Shape shape, std::vector<S> values, bool requires_grad = false) {
    if (numel_of(shape) != values.size())
      throw ShapeError("shape " + to_string(shape) + " needs " + std::to_string(numel_of(shape)) +
                       " values, got " + std::to_string(values.size()));
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  const Shape& shape() const noexcept { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const noexcept { return node_->shape.size(); }
  std::size_t numel() const noexcept { return node_->data.size(); }

  std::span<S> data() noexcept { return node_->data; }
  std::span<const S> data() const noexcept { return node_->data; }
  S item() const {
    if (numel() != 1) throw UsageError("item() on tensor of shape " + to_string(shape()));
    return node_->data[0];
  }
  S& operator[](std::size_t i) { return node_->data[i]; }
  const S& operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const noexcept { return node_->requires_grad; }
  void set_requires_grad(bool on) {
    node_->requires_grad = on;
    if (!on) node_->grad.clear();
  }

  bool has_grad() const noexcept { return !node_->grad.empty(); }
  std::span<const S> grad() const noexcept { return node_->grad; }
  std::span<S> mutable_grad() noexcept { return node_->grad; }
  void zero_grad() noexcept { node_->grad.clear(); }

  // Independent leaf with copied data.
  Tensor clone() const {
    Tensor t = from(shape(), node_->data, false);
    return t;
  }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>::from(shape(), std::vector<U>(node_->data.begin(), node_->data.end()));
  }

  Node<S>& node() noexcept { return *node_; }
  const std::shared_ptr<Node<S>>& node_ptr() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<S>> node_;
};

// Result node for an op over `inputs`. Gradient tracking is on iff any input
// tracks gradients; ops attach backward_fn only in that case.
template <class S>
Tensor<S> make_result(Shape shape, std::initializer_list<const Tensor<S>*> inputs) {
  auto out = Tensor<S>::zeros(std::move(shape));
  bool track = false;
  for (const auto* in : inputs) track = track || in->requires_grad();
  if (track) {
    out.node().requires_grad = true;
    for (const auto* in : inputs) out.node().parents.push_back(in->node_ptr());
  }
  return out;
}

template <class S>
void backward(Tensor<S>& loss) {
  if (loss.numel() != 1) throw UsageError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
  if (!loss.requires_grad()) return;

  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  std::vector<std::pair<Node<S>*, std::size_t>> stack{{&loss.node(), 0}};
  seen.insert(&loss.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<S>* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  loss.node().grad_buffer()[0] += S{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

}  // namespace arousal::nn
