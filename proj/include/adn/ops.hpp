#pragma once

// Differentiable primitives used by the disentanglement network and its
// losses. Image tensors follow the N x C x H x W convention. Every op is
// instantiated for float (training) and double (gradient checks).

#include <cstdint>

#include "adn/tensor.hpp"

namespace adn {

enum class PadMode { reflect, zero };

enum class Activation { relu, leaky_relu, tanh, sigmoid };

inline constexpr double kLeakySlope = 0.2;

/// 2-D cross-correlation. `bias` may be undefined. Reflect padding mirrors
/// without repeating the edge pixel, so it needs padding < H and < W.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, int stride, int padding, PadMode pad_mode);

/// Nearest-neighbour upsampling: out[.., i, j] = in[.., i / f, j / f].
template <typename T>
BasicTensor<T> nearest_upsample(const BasicTensor<T>& input, int factor);

/// Non-overlapping factor x factor average pooling (H, W divisible by factor).
template <typename T>
BasicTensor<T> avg_pool2d(const BasicTensor<T>& input, int factor);

/// Per-(n, c) plane normalisation with affine gain/shift of shape [C].
template <typename T>
BasicTensor<T> instance_norm(const BasicTensor<T>& input, const BasicTensor<T>& gain,
                             const BasicTensor<T>& shift, double eps = 1e-5);

/// Elementwise activation. The relu/leaky subgradient at exactly 0 takes the
/// negative-side slope (0 for relu, kLeakySlope for leaky relu).
template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& input, Activation kind);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) { return activation(x, Activation::relu); }
template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x) { return activation(x, Activation::leaky_relu); }
template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x) { return activation(x, Activation::tanh); }
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) { return activation(x, Activation::sigmoid); }

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, double factor);

/// Concatenates two N x C x H x W tensors along the channel axis.
template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a);

/// mean(|a - b|). Subgradient of |0| is 0.
template <typename T>
BasicTensor<T> l1_loss(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Binary cross-entropy on logits against an all-real or all-fake target,
/// averaged over elements, in the overflow-free form
/// max(z, 0) - z t + log(1 + exp(-|z|)).
template <typename T>
BasicTensor<T> gan_bce(const BasicTensor<T>& logits, bool target_is_real);

}  // namespace adn
