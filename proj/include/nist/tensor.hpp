// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nist::ad {

using Shape = std::vector<int>;

class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

template <typename T> struct Node;

/// Dense row-major tensor handle. Copies share storage; use clone() or
/// detach() for an independent leaf. Image tensors are batch x channels x
/// height x width.
template <typename T> class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t numel() const;

  std::span<const T> data() const;
  /// Writable storage. Only valid on leaves; mutating recorded values would
  /// invalidate their backward rules.
  std::span<T> mutable_data();

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  /// Accumulated gradient, empty when none has been computed.
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  T item() const;
  Tensor detach() const;
  bool is_leaf() const;

  Node<T>& node() const { return *node_; }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T> struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::uint64_t sequence = 0;
  std::string op;
  std::vector<std::shared_ptr<Node<T>>> parents;
  // Reads this->grad and accumulates into parents that require grad.
  std::function<void(Node<T>&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool previous_;
};

bool grad_enabled();

/// Populates gradients of every requires_grad leaf reachable from `loss`,
/// visiting recorded operations in exact reverse execution order. Calling it
/// again without zero_grad() accumulates into the same buffers.
template <typename T> void backward(const Tensor<T>& loss);

namespace detail {

/// Wraps freshly computed output data in a node. When recording is enabled and
/// any parent requires grad, the node joins the graph with `rule` as its
/// backward function.
template <typename T>
Tensor<T> record(std::string op, Shape shape, std::vector<T> data,
                 std::vector<Tensor<T>> parents, std::function<void(Node<T>&)> rule);

std::uint64_t next_sequence();

} // namespace detail

namespace fault {
/// Test-only hook: scales conv2d weight gradients by (1 + value). Zero disables.
void set_conv_backward_perturbation(double value);
double conv_backward_perturbation();
} // namespace fault

// ---- operators ------------------------------------------------------------

/// Stride-1 "same" cross-correlation. weight is Cout x Cin x k x k with odd k;
/// bias (Cout) may be undefined.
template <typename T> Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.2));
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);

/// Backward warp: out(p) = x(p + flow(p)). flow is B x 2 x H x W in normalized
/// coordinates ((-1,-1) top-left pixel center, (1,1) bottom-right), channel 0
/// horizontal. Samples clamp to the border.
template <typename T> Tensor<T> grid_sample_bilinear(const Tensor<T>& x, const Tensor<T>& flow);

/// 2x2 average pooling; spatial dims must be even.
template <typename T> Tensor<T> downsample2(const Tensor<T>& x);
/// Bilinear x2 upsampling with half-pixel centers and edge clamping.
template <typename T> Tensor<T> upsample2(const Tensor<T>& x);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis = 1);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> clamp(const Tensor<T>& a, T lo, T hi);
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

} // namespace nist::ad
