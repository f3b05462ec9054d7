// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

namespace nist::ad {
namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_sequence{0};
std::atomic<double> g_conv_fault{0.0};

template <typename T> std::shared_ptr<Node<T>> make_leaf(Shape shape, std::vector<T> data, bool rg) {
  if (data.size() != numel(shape)) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + to_string(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = rg;
  node->sequence = detail::next_sequence();
  node->op = "leaf";
  return node;
}

} // namespace

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

namespace detail {

std::uint64_t next_sequence() { return g_sequence.fetch_add(1, std::memory_order_relaxed); }

template <typename T>
Tensor<T> record(std::string op, Shape shape, std::vector<T> data, std::vector<Tensor<T>> parents,
                 std::function<void(Node<T>&)> rule) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = std::move(op);
  node->sequence = next_sequence();
  if (g_grad_enabled) {
    const bool any = std::any_of(parents.begin(), parents.end(), [](const Tensor<T>& p) {
      return p.defined() && p.requires_grad();
    });
    if (any) {
      node->requires_grad = true;
      node->backward = std::move(rule);
      for (auto& p : parents) node->parents.push_back(p.node_ptr());
    }
  }
  return Tensor<T>(std::move(node));
}

} // namespace detail

namespace fault {
void set_conv_backward_perturbation(double value) { g_conv_fault.store(value); }
double conv_backward_perturbation() { return g_conv_fault.load(); }
} // namespace fault

template <typename T> Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = ad::numel(shape);
  return Tensor(make_leaf<T>(std::move(shape), std::vector<T>(n, T(0)), requires_grad));
}

template <typename T> Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = ad::numel(shape);
  return Tensor(make_leaf<T>(std::move(shape), std::vector<T>(n, value), requires_grad));
}

template <typename T> Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> data, bool requires_grad) {
  return Tensor(make_leaf<T>(std::move(shape), std::move(data), requires_grad));
}

template <typename T> const Shape& Tensor<T>::shape() const { return node_->shape; }
template <typename T> std::size_t Tensor<T>::numel() const { return node_->data.size(); }
template <typename T> std::span<const T> Tensor<T>::data() const { return node_->data; }

template <typename T> std::span<T> Tensor<T>::mutable_data() {
  if (!is_leaf()) throw std::logic_error("mutable_data() on a recorded (non-leaf) tensor");
  return node_->data;
}

template <typename T> bool Tensor<T>::requires_grad() const { return node_->requires_grad; }

template <typename T> void Tensor<T>::set_requires_grad(bool value) {
  if (!is_leaf()) throw std::logic_error("set_requires_grad() on a non-leaf tensor");
  node_->requires_grad = value;
}

template <typename T> bool Tensor<T>::has_grad() const { return !node_->grad.empty(); }
template <typename T> std::span<const T> Tensor<T>::grad() const { return node_->grad; }
template <typename T> std::span<T> Tensor<T>::mutable_grad() { return node_->ensure_grad(); }

template <typename T> void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T> T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->data[0];
}

template <typename T> Tensor<T> Tensor<T>::detach() const {
  return Tensor(make_leaf<T>(node_->shape, node_->data, false));
}

template <typename T> bool Tensor<T>::is_leaf() const { return !node_->backward; }

template <typename T> void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() requires a scalar loss, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack = {&loss.node()};
  seen.insert(stack.back());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->sequence > b->sequence; });

  loss.node().ensure_grad()[0] += T(1);
  for (Node<T>* n : order) {
    if (!n->backward || n->grad.empty()) continue;
    n->backward(*n);
    // interior gradients are consumed; only leaves keep theirs
    std::vector<T>().swap(n->grad);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template Tensor<float> detail::record(std::string, Shape, std::vector<float>, std::vector<Tensor<float>>,
                                      std::function<void(Node<float>&)>);
template Tensor<double> detail::record(std::string, Shape, std::vector<double>,
                                       std::vector<Tensor<double>>, std::function<void(Node<double>&)>);

} // namespace nist::ad
