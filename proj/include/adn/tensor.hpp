#pragma once

// Dense row-major tensor with tape-free reverse-mode autodiff.
//
// Every tensor produced by a differentiable op while grad mode is enabled
// records the node that created it. backward() topologically sorts the
// nodes reachable from a scalar loss, runs them once each in reverse
// order, and releases the graph. Leaf gradients accumulate across calls
// until zero_grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adn/error.hpp"

namespace adn {

using Shape = std::vector<std::int64_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class BasicTensor;
template <typename T>
class BasicGraph;

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct Node {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  // Reads out.grad and accumulates into the inputs that require grad.
  std::function<void(const TensorImpl<T>& out)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node<T>> grad_fn;

  void accumulate_grad(std::span<const T> g) {
    if (grad.empty()) {
      grad.assign(g.begin(), g.end());
      return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
  }
  // Returns a zero-initialised grad buffer, creating it if needed.
  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

/// Whether differentiable ops currently record graph nodes (thread-local).
bool grad_enabled();

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

template <typename T>
class BasicTensor {
 public:
  using Scalar = T;
  using Impl = detail::TensorImpl<T>;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> values);
  explicit BasicTensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape), T(0)); }
  static BasicTensor ones(Shape shape) { return BasicTensor(std::move(shape), T(1)); }
  static BasicTensor scalar(T value) { return BasicTensor(Shape{}, value); }
  static BasicTensor randn(Shape shape, std::mt19937_64& rng, T stddev = T(1));
  static BasicTensor uniform(Shape shape, std::mt19937_64& rng, T lo, T hi);

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::int64_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  // Mutable access is meant for leaves (parameters, freshly built inputs).
  std::span<T> mutable_data() { return impl_->data; }
  std::vector<T> to_vector() const { return impl_->data; }
  T item() const;
  T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w);
  T at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const;

  bool requires_grad() const { return impl_->requires_grad; }
  BasicTensor& set_requires_grad(bool flag);
  bool is_leaf() const { return !impl_->grad_fn; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  // Gradient as a fresh tensor (zeros if none accumulated yet).
  BasicTensor grad_tensor() const;
  void zero_grad() { impl_->grad.clear(); }

  BasicTensor detach() const;
  BasicTensor clone() const { return detach(); }
  BasicTensor reshape(Shape shape) const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(impl_->data[i]);
    return BasicTensor<U>(shape(), std::move(out));
  }

  const std::shared_ptr<Impl>& impl() const { return impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Topologically ordered view of the nodes reachable from a root tensor.
template <typename T>
class BasicGraph {
 public:
  using Impl = detail::TensorImpl<T>;

  static BasicGraph trace(const BasicTensor<T>& root);

  // Non-leaf tensors in topological order (inputs before outputs).
  const std::vector<std::shared_ptr<Impl>>& nodes() const { return nodes_; }
  // Leaves with requires_grad reachable from the root.
  const std::vector<std::shared_ptr<Impl>>& leaves() const { return leaves_; }

  // Seeds the root with ones and runs each node once, in reverse order.
  // Intermediate gradients and the recorded nodes are released afterwards.
  void run_backward();

 private:
  std::shared_ptr<Impl> root_;
  std::vector<std::shared_ptr<Impl>> nodes_;
  std::vector<std::shared_ptr<Impl>> leaves_;
};

using Graph = BasicGraph<float>;

/// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
/// Throws ArgumentError if loss is not a single element.
template <typename T>
void backward(const BasicTensor<T>& loss);

namespace detail {

// Wraps freshly computed output values as a tensor, validates finiteness,
// and records a node when any input requires grad and grad mode is on.
template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                           std::vector<std::shared_ptr<TensorImpl<T>>> inputs,
                           std::function<void(const TensorImpl<T>&)> backward_fn);

}  // namespace detail

}  // namespace adn
