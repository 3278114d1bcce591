#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "uecg/errors.hpp"
#include "uecg/nn/rng.hpp"

namespace uecg::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += " x ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// One node of the implicit backward graph. `backprop` pulls this node's grad
// into the grads of `parents`; both are only populated while some parent is
// tracked, so inference-only forwards build no graph at all.
template <typename S>
struct TensorNode {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
  }
};

// Value-semantics handle onto a graph node. Copies share the node, which is
// what parameter registries and optimizers rely on.
template <typename S>
class Tensor {
 public:
  using Node = TensorNode<S>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), S(0), requires_grad);
  }

  static Tensor filled(Shape shape, S fill, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value.assign(numel(shape), fill);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from(Shape shape, std::vector<S> values, bool requires_grad = false) {
    if (numel(shape) != values.size())
      throw DimensionError("tensor: " + std::to_string(values.size()) +
                           " values do not fill shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar_of(S v) { return from({1}, {v}); }

  static Tensor randn(Shape shape, Rng& rng, double stddev, bool requires_grad = false) {
    std::vector<S> vals(numel(shape));
    for (auto& v : vals) v = static_cast<S>(rng.gaussian() * stddev);
    return from(std::move(shape), std::move(vals), requires_grad);
  }

  static Tensor from_node(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return node().shape; }
  std::size_t size() const { return node().value.size(); }

  std::size_t rows() const {
    require_2d("rows");
    return node().shape[0];
  }
  std::size_t cols() const {
    require_2d("cols");
    return node().shape[1];
  }

  std::vector<S>& v() { return node().value; }
  const std::vector<S>& v() const { return node().value; }

  std::vector<S>& g() {
    node().ensure_grad();
    return node().grad;
  }
  const std::vector<S>& g() const {
    if (node().grad.empty()) throw StateError("tensor: gradient not populated");
    return node().grad;
  }
  bool has_grad() const { return !node().grad.empty(); }

  S at(std::size_t r, std::size_t c) const {
    require_2d("at");
    return node().value[r * node().shape[1] + c];
  }
  S& at(std::size_t r, std::size_t c) {
    require_2d("at");
    return node().value[r * node().shape[1] + c];
  }

  bool requires_grad() const { return node().requires_grad; }
  void set_requires_grad(bool rg) { node().requires_grad = rg; }

  void zero_grad() {
    auto& nd = node();
    nd.grad.assign(nd.value.size(), S(0));
  }

  S scalar() const {
    if (size() != 1)
      throw DimensionError("tensor: scalar() on shape " + shape_str(shape()));
    return node().value[0];
  }

  // Reverse-mode sweep from a scalar root. Parents are visited in reverse
  // topological order; node order is deterministic because it only depends on
  // graph construction order.
  void backward() {
    if (size() != 1)
      throw DimensionError("backward: root must be scalar, got " + shape_str(shape()));
    if (!std::isfinite(static_cast<double>(node().value[0])))
      throw NumericError("backward: loss is not finite");
    if (!node().requires_grad) return;

    enum : char { kOpen = 1, kDone = 2 };
    std::unordered_map<Node*, char> state;
    std::vector<Node*> order;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(&node(), 0);
    while (!stack.empty()) {
      auto& top = stack.back();
      Node* nd = top.first;
      char& st = state[nd];
      if (st == kDone) {
        stack.pop_back();
        continue;
      }
      st = kOpen;
      if (top.second < nd->parents.size()) {
        Node* p = nd->parents[top.second++].get();
        if (p->requires_grad && state[p] == 0) stack.emplace_back(p, 0);
      } else {
        st = kDone;
        order.push_back(nd);
        stack.pop_back();
      }
    }

    node().ensure_grad();
    node().grad[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* nd = *it;
      if (nd->backprop) {
        nd->ensure_grad();
        nd->backprop(*nd);
      }
    }
  }

  Node& node() {
    if (!n_) throw StateError("tensor: handle is empty");
    return *n_;
  }
  const Node& node() const {
    if (!n_) throw StateError("tensor: handle is empty");
    return *n_;
  }
  const std::shared_ptr<Node>& ptr() const { return n_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  void require_2d(const char* who) const {
    if (shape().size() != 2)
      throw DimensionError(std::string("tensor: ") + who + " needs a 2-D tensor, got " +
                           shape_str(shape()));
  }

  std::shared_ptr<Node> n_;
};

// Shared construction path for every op: the result only becomes part of the
// graph when at least one input is tracked.
template <typename S>
Tensor<S> make_op(Shape shape, std::vector<S> value, const std::vector<Tensor<S>>& parents,
                  std::function<void(TensorNode<S>&)> backprop) {
  auto node = std::make_shared<TensorNode<S>>();
  if (numel(shape) != value.size())
    throw DimensionError("make_op: value size does not match shape " + shape_str(shape));
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool track = false;
  for (const auto& p : parents) track = track || p.requires_grad();
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.ptr());
    node->backprop = std::move(backprop);
  }
  return Tensor<S>::from_node(std::move(node));
}

}  // namespace uecg::nn
