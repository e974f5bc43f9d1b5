#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rrk/error.hpp"

namespace rrk::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string to_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  T* grad_data() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad.data();
  }
};

/// Handle to a node. Copies share storage; leaves created with
/// requires_grad act as trainable parameters and accumulate gradients
/// across backward passes until zero_grad().
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value.assign(numel(shape), T(0));
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (numel(shape) != data.size()) {
      throw DimensionError("tensor data of length " + std::to_string(data.size()) +
                           " does not fit shape " + to_string(shape));
    }
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v) { return from_data({}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rank() const { return node_->shape.size(); }
  /// Leading extent for 2-D tensors; 1 for vectors and scalars.
  std::size_t rows() const { return rank() == 2 ? node_->shape[0] : 1; }
  /// Trailing extent; 1 for scalars.
  std::size_t cols() const { return rank() == 0 ? 1 : node_->shape.back(); }

  std::span<const T> data() const { return node_->value; }
  std::span<T> mutable_data() { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<T> mutable_grad() {
    node_->grad_data();
    return node_->grad;
  }

  T item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() { node_->grad.clear(); }

  /// Same values, no history, no gradient requirement.
  Tensor detach() const { return from_data(shape(), node_->value, false); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Records executed operations for one forward pass. Nodes are appended in
/// execution order and backward walks them in exact reverse. A disabled graph
/// records nothing, which is how inference runs.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Node<T>&)>;

  explicit Graph(bool enabled = true) : enabled_(enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool enabled() const { return enabled_; }
  std::size_t size() const { return tape_.size(); }

  /// Wraps an op result. The result requires grad when recording is enabled
  /// and at least one parent requires grad; only then is it taped.
  Tensor<T> make(Shape shape, std::vector<T> value, std::vector<Tensor<T>> parents,
                 BackwardFn backward) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool needs = false;
    if (enabled_) {
      for (const auto& p : parents) needs = needs || p.requires_grad();
    }
    if (needs) {
      n->requires_grad = true;
      n->parents.reserve(parents.size());
      for (const auto& p : parents) n->parents.push_back(p.node_ptr());
      n->backward = std::move(backward);
      tape_.push_back(n);
    }
    return Tensor<T>(std::move(n));
  }

  void backward(const Tensor<T>& root) {
    if (root.size() != 1) {
      throw ContractError("backward requires a scalar root, got shape " +
                          to_string(root.shape()));
    }
    if (!root.requires_grad()) return;
    root.node()->grad_data()[0] += T(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
      Node<T>& n = **it;
      if (!n.grad.empty() && n.backward) n.backward(n);
    }
  }

  /// Drops the tape; parameter gradients stay with the parameters.
  void clear() { tape_.clear(); }

 private:
  std::vector<std::shared_ptr<Node<T>>> tape_;
  bool enabled_;
};

}  // namespace rrk::ad
