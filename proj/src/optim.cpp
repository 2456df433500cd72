#include "adn/optim.hpp"

#include <cmath>

namespace adn {

AdamState AdamState::for_params(std::span<const Tensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.push_back(Tensor::zeros(p.shape()));
    s.v.push_back(Tensor::zeros(p.shape()));
  }
  return s;
}

void adam_step(std::span<Tensor> params, AdamState& state, const AdamOptions& options) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state holds " + std::to_string(state.m.size()) +
                         " moments for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].shape() != params[i].shape() || state.v[i].shape() != params[i].shape()) {
      throw DimensionError("adam_step: moment shape " + shape_str(state.m[i].shape()) +
                           " does not match parameter " + shape_str(params[i].shape()));
    }
  }
  ++state.step;
  const double b1 = options.beta1, b2 = options.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto m = state.m[i].mutable_data();
    auto v = state.v[i].mutable_data();
    const auto g = params[i].grad();
    const bool has_grad = !g.empty();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = has_grad ? g[k] : 0.0;
      m[k] = static_cast<float>(b1 * m[k] + (1.0 - b1) * gk);
      v[k] = static_cast<float>(b2 * v[k] + (1.0 - b2) * gk * gk);
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] = static_cast<float>(p[k] - options.lr * mhat / (std::sqrt(vhat) + options.eps));
    }
  }
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (float g : p.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      auto& g = p.impl()->grad;
      for (auto& x : g) x = static_cast<float>(x * f);
    }
  }
  return norm;
}

}  // namespace adn
