#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adn/tensor.hpp"

namespace adn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments for one parameter group, index-aligned with the
/// parameter list it was created for.
struct AdamState {
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState for_params(std::span<const Tensor> params);
};

/// One bias-corrected Adam update using each parameter's accumulated grad.
/// Parameters without a grad are treated as having a zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state, const AdamOptions& options);

/// Scales all grads so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

}  // namespace adn
