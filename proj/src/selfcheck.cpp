#include "adn/selfcheck.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "adn/ctsim.hpp"
#include "adn/ops.hpp"

namespace adn {

namespace {

using Fn = std::function<Tensor64(const std::vector<Tensor64>&)>;

// Relative L2 distance between analytic and central-difference gradients
// over all inputs.
double gradient_error(const Fn& f, std::vector<Tensor64> inputs) {
  for (auto& x : inputs) x.set_requires_grad(true);
  Tensor64 out = f(inputs);
  backward(out);
  const double h = 1e-6;
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::vector<double> analytic = inputs[i].grad_tensor().to_vector();
    for (std::size_t k = 0; k < inputs[i].numel(); ++k) {
      auto probe = [&](double delta) {
        NoGradGuard off;
        std::vector<Tensor64> shifted;
        for (auto& x : inputs) shifted.push_back(x.detach().clone());
        shifted[i].mutable_data()[k] += delta;
        return f(shifted).item();
      };
      const double numeric = (probe(h) - probe(-h)) / (2.0 * h);
      diff += (analytic[k] - numeric) * (analytic[k] - numeric);
      norm += numeric * numeric;
    }
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

Tensor64 rand64(Shape s, std::mt19937_64& rng) { return Tensor64::randn(std::move(s), rng, 1.0); }

}  // namespace

std::vector<CheckResult> run_selfcheck() {
  std::mt19937_64 rng(20240601);
  const double tol = 1e-6;
  std::vector<CheckResult> out;
  auto grad = [&](const std::string& name, const Fn& f, std::vector<Tensor64> inputs) {
    const double e = gradient_error(f, std::move(inputs));
    out.push_back({"grad/" + name, e < tol, e, tol});
  };
  // Fixed random projection so every check reduces to a scalar with a
  // non-trivial upstream gradient.
  auto head = [](const Tensor64& y) {
    std::vector<double> w(y.numel());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(0.7 * static_cast<double>(i) + 0.3);
    return sum(mul(y, Tensor64(y.shape(), std::move(w))));
  };

  for (PadMode mode : {PadMode::reflect, PadMode::zero}) {
    const std::string tag = mode == PadMode::reflect ? "reflect" : "zero";
    grad("conv2d_k3s1_" + tag,
         [&](const auto& v) { return head(conv2d(v[0], v[1], v[2], 1, 1, mode)); },
         {rand64({2, 3, 6, 6}, rng), rand64({4, 3, 3, 3}, rng), rand64({4}, rng)});
    grad("conv2d_k4s2_" + tag,
         [&](const auto& v) { return head(conv2d(v[0], v[1], v[2], 2, 1, mode)); },
         {rand64({1, 2, 8, 8}, rng), rand64({3, 2, 4, 4}, rng), rand64({3}, rng)});
  }
  grad("instance_norm", [&](const auto& v) { return head(instance_norm(v[0], v[1], v[2])); },
       {rand64({2, 3, 5, 5}, rng), rand64({3}, rng), rand64({3}, rng)});
  grad("nearest_upsample", [&](const auto& v) { return head(nearest_upsample(v[0], 2)); }, {rand64({1, 2, 3, 4}, rng)});
  grad("avg_pool2d", [&](const auto& v) { return head(avg_pool2d(v[0], 2)); }, {rand64({1, 2, 4, 4}, rng)});
  for (Activation a : {Activation::relu, Activation::leaky_relu, Activation::tanh, Activation::sigmoid}) {
    static const char* names[] = {"relu", "leaky_relu", "tanh", "sigmoid"};
    grad(names[static_cast<int>(a)], [&](const auto& v) { return head(activation(v[0], a)); },
         {rand64({2, 2, 3, 3}, rng)});
  }
  grad("concat_channels", [&](const auto& v) { return head(concat_channels(v[0], v[1])); },
       {rand64({2, 1, 3, 3}, rng), rand64({2, 2, 3, 3}, rng)});
  grad("add_sub_mul_scale", [&](const auto& v) { return head(scale(mul(add(v[0], v[1]), sub(v[0], v[1])), 0.3)); },
       {rand64({2, 3}, rng), rand64({2, 3}, rng)});
  grad("mean", [&](const auto& v) { return mean(mul(v[0], v[0])); }, {rand64({3, 4}, rng)});
  grad("l1_loss", [&](const auto& v) { return l1_loss(v[0], v[1]); }, {rand64({2, 5}, rng), rand64({2, 5}, rng)});
  grad("gan_bce_real", [&](const auto& v) { return gan_bce(v[0], true); }, {rand64({1, 1, 4, 4}, rng)});
  grad("gan_bce_fake", [&](const auto& v) { return gan_bce(v[0], false); }, {rand64({1, 1, 4, 4}, rng)});

  {
    // <A x, y> = <x, A^T y> for the ray-driven projector.
    const ct::Geometry geo = ct::Geometry::for_image(32, 24);
    std::mt19937_64 r2(7);
    const Tensor x = Tensor::uniform({32, 32}, r2, 0.0f, 1.0f);
    const Tensor y = Tensor::uniform({geo.num_angles, geo.num_detectors}, r2, 0.0f, 1.0f);
    const Tensor ax = ct::radon(x, geo).data;
    ct::Sinogram ys;
    ys.data = y;
    ys.geometry = geo;
    const Tensor aty = ct::radon_adjoint(ys);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < ax.numel(); ++i) lhs += static_cast<double>(ax.data()[i]) * y.data()[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs += static_cast<double>(x.data()[i]) * aty.data()[i];
    const double e = std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-12);
    out.push_back({"radon_adjoint", e < 1e-4, e, 1e-4});
  }
  return out;
}

}  // namespace adn
