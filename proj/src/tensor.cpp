#include "adn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace adn {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : impl_(std::make_shared<Impl>()) {
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<Impl>()) {
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::randn(Shape shape, std::mt19937_64& rng, T stddev) {
  BasicTensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
  for (auto& v : t.impl_->data) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::uniform(Shape shape, std::mt19937_64& rng, T lo, T hi) {
  BasicTensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  for (auto& v : t.impl_->data) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw ArgumentError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

template <typename T>
T& BasicTensor<T>::at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
  const auto& s = impl_->shape;
  return impl_->data[static_cast<std::size_t>(((n * s[1] + c) * s[2] + h) * s[3] + w)];
}

template <typename T>
T BasicTensor<T>::at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
  const auto& s = impl_->shape;
  return impl_->data[static_cast<std::size_t>(((n * s[1] + c) * s[2] + h) * s[3] + w)];
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool flag) {
  if (!is_leaf()) throw ArgumentError("requires_grad can only be changed on leaf tensors");
  impl_->requires_grad = flag;
  return *this;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::grad_tensor() const {
  if (impl_->grad.empty()) return zeros(shape());
  return BasicTensor(shape(), impl_->grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(shape(), impl_->data);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshape(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw DimensionError("cannot reshape " + shape_str(shape()) + " to " + shape_str(new_shape));
  }
  auto src = impl_;
  return detail::make_result<T>("reshape", std::move(new_shape), impl_->data, {src},
                                [src](const Impl& out) {
                                  if (src->requires_grad) src->accumulate_grad(out.grad);
                                });
}

template <typename T>
BasicGraph<T> BasicGraph<T>::trace(const BasicTensor<T>& root) {
  BasicGraph g;
  g.root_ = root.impl();
  std::unordered_set<const Impl*> visited;
  // Iterative post-order DFS: (tensor, next input index).
  std::vector<std::pair<std::shared_ptr<Impl>, std::size_t>> stack;
  stack.emplace_back(g.root_, 0);
  visited.insert(g.root_.get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    if (!impl->grad_fn) {
      if (impl->requires_grad) g.leaves_.push_back(impl);
      stack.pop_back();
      continue;
    }
    const auto& inputs = impl->grad_fn->inputs;
    if (next < inputs.size()) {
      auto child = inputs[next++];
      if (visited.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
      continue;
    }
    g.nodes_.push_back(impl);
    stack.pop_back();
  }
  return g;
}

template <typename T>
void BasicGraph<T>::run_backward() {
  if (!root_->grad_fn) {
    if (root_->requires_grad) root_->accumulate_grad(std::vector<T>(root_->data.size(), T(1)));
    return;
  }
  root_->grad.assign(root_->data.size(), T(1));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& impl = *it;
    if (!impl->grad.empty()) impl->grad_fn->backward(*impl);
    impl->grad.clear();
    impl->grad.shrink_to_fit();
    impl->grad_fn.reset();
  }
  nodes_.clear();
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ArgumentError("backward() requires a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  BasicGraph<T>::trace(loss).run_backward();
}

namespace detail {

template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                           std::vector<std::shared_ptr<TensorImpl<T>>> inputs,
                           std::function<void(const TensorImpl<T>&)> backward_fn) {
  for (const T& v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
  }
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  if (grad_enabled()) {
    bool any = false;
    for (const auto& in : inputs) any = any || in->requires_grad;
    if (any) {
      impl->requires_grad = true;
      auto node = std::make_shared<Node<T>>();
      node->op = op;
      node->inputs = std::move(inputs);
      node->backward = std::move(backward_fn);
      impl->grad_fn = std::move(node);
    }
  }
  return BasicTensor<T>(std::move(impl));
}

template BasicTensor<float> make_result<float>(const char*, Shape, std::vector<float>,
                                               std::vector<std::shared_ptr<TensorImpl<float>>>,
                                               std::function<void(const TensorImpl<float>&)>);
template BasicTensor<double> make_result<double>(const char*, Shape, std::vector<double>,
                                                 std::vector<std::shared_ptr<TensorImpl<double>>>,
                                                 std::function<void(const TensorImpl<double>&)>);

}  // namespace detail

template class BasicTensor<float>;
template class BasicTensor<double>;
template class BasicGraph<float>;
template class BasicGraph<double>;
template void backward<float>(const BasicTensor<float>&);
template void backward<double>(const BasicTensor<double>&);

}  // namespace adn
