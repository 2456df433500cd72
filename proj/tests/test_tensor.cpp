#include <doctest.h>

#include <cmath>
#include <random>

#include "adn/error.hpp"
#include "adn/ops.hpp"
#include "adn/optim.hpp"
#include "adn/tensor_io.hpp"
#include "grad_cases.hpp"
#include "oracles.hpp"

using namespace adn;

namespace {

std::vector<double> to_double(const Tensor& t) {
  std::vector<double> v;
  for (float x : t.data()) v.push_back(x);
  return v;
}

// Sets the accumulated grad of `p` to `g` through a linear head.
void set_grad(Tensor& p, const std::vector<float>& g) {
  p.zero_grad();
  backward(sum(mul(p, Tensor(p.shape(), g))));
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel returns the input") {
  std::mt19937_64 rng(1);
  const Tensor x = Tensor::randn({2, 3, 5, 6}, rng);
  Tensor w({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0) = 1.0f;
  const Tensor y = conv2d(x, w, Tensor(), 1, 0, PadMode::zero);
  CHECK(y.shape() == x.shape());
  CHECK(y.to_vector() == x.to_vector());
}

TEST_CASE("conv2d: all-ones 3x3 on a constant plane with reflect padding gives 9v") {
  const float v = 0.37f;
  const Tensor x({1, 1, 6, 7}, v);
  const Tensor y = conv2d(x, Tensor::ones({1, 1, 3, 3}), Tensor::zeros({1}), 1, 1, PadMode::reflect);
  REQUIRE(y.shape() == Shape{1, 1, 6, 7});
  for (float o : y.data()) CHECK(o == doctest::Approx(9.0 * v).epsilon(1e-6));
}

TEST_CASE("conv2d: matches direct convolution") {
  std::mt19937_64 rng(2);
  struct Setup {
    int stride, pad;
    PadMode mode;
  };
  for (const Setup s : {Setup{2, 0, PadMode::zero}, Setup{2, 1, PadMode::reflect}, Setup{1, 1, PadMode::zero},
                        Setup{1, 2, PadMode::reflect}}) {
    const Tensor x = Tensor::randn({1, 2, 5, 5}, rng), w = Tensor::randn({3, 2, 3, 3}, rng),
                 b = Tensor::randn({3}, rng);
    const Tensor y = conv2d(x, w, b, s.stride, s.pad, s.mode);
    const auto want = oracle::direct_conv2d(to_double(x), 1, 2, 5, 5, to_double(w), 3, 3, to_double(b), s.stride,
                                            s.pad, s.mode == PadMode::reflect);
    REQUIRE(y.numel() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(y.data()[i] - want[i]) < 1e-5);
  }
  // Larger shapes exercise the interior fast path.
  const Tensor x = Tensor::randn({2, 3, 16, 12}, rng), w = Tensor::randn({4, 3, 7, 7}, rng, 0.1f);
  const Tensor y = conv2d(x, w, Tensor(), 1, 3, PadMode::reflect);
  const auto want = oracle::direct_conv2d(to_double(x), 2, 3, 16, 12, to_double(w), 4, 7, {}, 1, 3, true);
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(y.data()[i] - want[i]) < 1e-5);
}

TEST_CASE("conv2d: output size and errors") {
  const Tensor x({1, 2, 9, 7});
  CHECK(conv2d(x, Tensor({3, 2, 4, 4}), Tensor(), 2, 1, PadMode::zero).shape() == Shape{1, 3, 4, 3});
  CHECK_THROWS_AS(conv2d(x, Tensor({3, 3, 3, 3}), Tensor(), 1, 1, PadMode::zero), DimensionError);
  CHECK_THROWS_AS(conv2d(x, Tensor({3, 2, 3, 3}), Tensor({2}), 1, 1, PadMode::zero), DimensionError);
  CHECK_THROWS_AS(conv2d(x, Tensor({3, 2, 3, 3}), Tensor(), 1, 7, PadMode::reflect), ArgumentError);
  CHECK_THROWS_AS(conv2d(x, Tensor({3, 2, 11, 11}), Tensor(), 1, 0, PadMode::zero), ArgumentError);
  CHECK_THROWS_AS(conv2d(x, Tensor({3, 2, 3, 3}), Tensor(), 0, 1, PadMode::zero), ArgumentError);
}

TEST_CASE("backward: sum gives ones, l1 gives sign / numel") {
  std::mt19937_64 rng(3);
  Tensor a = Tensor::randn({2, 3, 4}, rng);
  a.set_requires_grad(true);
  backward(sum(a));
  for (float g : a.grad()) CHECK(g == 1.0f);

  a.zero_grad();
  const Tensor b = Tensor::randn({2, 3, 4}, rng);
  backward(l1_loss(a, b));
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const float s = a.data()[i] > b.data()[i] ? 1.0f : -1.0f;
    CHECK(a.grad()[i] == doctest::Approx(s / 24.0f));
  }
}

TEST_CASE("backward: accumulates across calls and rejects non-scalar losses") {
  Tensor a({3}, 2.0f);
  a.set_requires_grad(true);
  backward(sum(a));
  backward(sum(a));
  for (float g : a.grad()) CHECK(g == 2.0f);
  CHECK_THROWS_AS(backward(scale(a, 2.0)), ArgumentError);
}

TEST_CASE("backward: every op agrees with finite differences at 32 bits") {
  for (auto& c : grad_cases::all<float>(11)) {
    CAPTURE(c.name);
    const auto r = oracle::fd_check<float>(c.fn, c.inputs, 1e-3, 1e-1);
    CHECK(r.max_element < 1e-2);
    CHECK(r.aggregate < 1e-3);
  }
}

TEST_CASE("backward: every op agrees with finite differences at 64 bits") {
  for (auto& c : grad_cases::all<double>(12)) {
    CAPTURE(c.name);
    const auto r = oracle::fd_check<double>(c.fn, c.inputs, 1e-6, 1e-6);
    CHECK(r.aggregate < 1e-4);
    CHECK(r.max_element < 1e-3);
  }
}

TEST_CASE("nearest_upsample: identity at factor 1, block replication, errors") {
  const Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  CHECK(nearest_upsample(x, 1).to_vector() == x.to_vector());
  const Tensor y = nearest_upsample(x, 2);
  REQUIRE(y.shape() == Shape{1, 1, 4, 4});
  CHECK(y.to_vector() == std::vector<float>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});
  CHECK_THROWS_AS(nearest_upsample(x, 0), ArgumentError);
}

TEST_CASE("nearest_upsample then avg_pool2d recovers the input exactly") {
  std::mt19937_64 rng(4);
  const Tensor x = Tensor::randn({2, 3, 5, 4}, rng);
  for (int f : {1, 2, 3, 4}) CHECK(avg_pool2d(nearest_upsample(x, f), f).to_vector() == x.to_vector());
}

TEST_CASE("instance_norm: standardised plane passes through, constant plane maps to shift") {
  std::vector<float> v{-1.5f, -0.5f, 0.5f, 1.5f};
  const double sd = std::sqrt(1.25);
  for (auto& x : v) x = static_cast<float>(x / sd);
  const Tensor y = instance_norm(Tensor({1, 1, 2, 2}, v), Tensor::ones({1}), Tensor::zeros({1}));
  for (std::size_t i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(v[i]).epsilon(1e-4));

  const Tensor c = instance_norm(Tensor({1, 2, 3, 3}, 5.0f), Tensor({2}, 3.0f), Tensor({2}, std::vector<float>{0.25f, -2}));
  for (int i = 0; i < 9; ++i) {
    CHECK(c.data()[i] == 0.25f);
    CHECK(c.data()[9 + i] == -2.0f);
  }
  CHECK_THROWS_AS(instance_norm(Tensor({1, 1, 1, 1}), Tensor::ones({1}), Tensor::zeros({1})), ArgumentError);
  CHECK_THROWS_AS(instance_norm(Tensor({1, 2, 2, 2}), Tensor::ones({1}), Tensor::zeros({1})), DimensionError);
}

TEST_CASE("activations: values and subgradient at zero") {
  const Tensor x({4}, std::vector<float>{-1, 0, 2, -3});
  CHECK(relu(x).to_vector() == std::vector<float>{0, 0, 2, 0});
  CHECK(leaky_relu(x).data()[0] == doctest::Approx(-0.2));
  CHECK(sigmoid(Tensor::scalar(0.0f)).item() == 0.5f);
  CHECK(tanh(Tensor::scalar(0.5f)).item() == doctest::Approx(std::tanh(0.5)));

  Tensor z({2}, 0.0f);
  z.set_requires_grad(true);
  backward(sum(relu(z)));
  CHECK(z.grad()[0] == 0.0f);
  z.zero_grad();
  backward(sum(leaky_relu(z)));
  CHECK(z.grad()[0] == doctest::Approx(0.2));
}

TEST_CASE("l1_loss: values") {
  const Tensor a({2}, std::vector<float>{1, 2});
  CHECK(l1_loss(a, a).item() == 0.0f);
  CHECK(l1_loss(a, Tensor::zeros({2})).item() == 1.5f);
  CHECK_THROWS_AS(l1_loss(a, Tensor::zeros({3})), DimensionError);

  std::mt19937_64 rng(5);
  const Tensor p = Tensor::randn({3, 7, 5}, rng), q = Tensor::randn({3, 7, 5}, rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) acc += std::abs(static_cast<double>(p.data()[i]) - q.data()[i]);
  CHECK(l1_loss(p, q).item() == doctest::Approx(acc / p.numel()).epsilon(1e-6));
}

TEST_CASE("gan_bce: reference values and stability") {
  CHECK(gan_bce(Tensor({1, 1, 2, 2}, 0.0f), true).item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(gan_bce(Tensor({3}, 40.0f), true).item() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(gan_bce(Tensor({3}, 40.0f), false).item() == doctest::Approx(40.0));
  CHECK(std::isfinite(gan_bce(Tensor({3}, -1e4f), true).item()));

  std::mt19937_64 rng(6);
  const Tensor64 z = Tensor64::randn({2, 1, 6, 6}, rng, 5.0);
  for (bool real : {true, false}) {
    CHECK(std::abs(gan_bce(z, real).item() - oracle::bce_mean(z.to_vector(), real)) < 1e-12);
  }
}

TEST_CASE("adam: zero gradient leaves parameters, counter advances") {
  std::mt19937_64 rng(7);
  std::vector<Tensor> p{Tensor::randn({3, 2}, rng)};
  p[0].set_requires_grad(true);
  const auto before = p[0].to_vector();
  auto state = AdamState::for_params(p);
  adam_step(p, state, {});
  set_grad(p[0], std::vector<float>(6, 0.0f));
  adam_step(p, state, {});
  CHECK(p[0].to_vector() == before);
  CHECK(state.step == 2);
}

TEST_CASE("adam: one step on a scalar moves by lr") {
  std::vector<Tensor> p{Tensor({1}, 1.0f)};
  p[0].set_requires_grad(true);
  set_grad(p[0], {1.0f});
  auto state = AdamState::for_params(p);
  adam_step(p, state, {0.1, 0.9, 0.999, 1e-8});
  CHECK(p[0].item() == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("adam: ten steps match a scripted reference") {
  std::mt19937_64 rng(8);
  std::vector<Tensor> p{Tensor::randn({4, 3}, rng)};
  p[0].set_requires_grad(true);
  oracle::Adam ref{1e-2, 0.5, 0.999, 1e-8};
  std::vector<double> q(p[0].data().begin(), p[0].data().end());
  auto state = AdamState::for_params(p);
  std::normal_distribution<float> nd;
  for (int s = 0; s < 10; ++s) {
    std::vector<float> g(12);
    for (auto& x : g) x = nd(rng);
    set_grad(p[0], g);
    adam_step(p, state, {1e-2, 0.5, 0.999, 1e-8});
    ref.step(q, std::vector<double>(g.begin(), g.end()));
  }
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::abs(p[0].data()[i] - q[i]) < 1e-6);
}

TEST_CASE("adam: mismatched state is a dimension error") {
  std::vector<Tensor> p{Tensor({2})}, other{Tensor({3})};
  auto state = AdamState::for_params(other);
  CHECK_THROWS_AS(adam_step(p, state, {}), DimensionError);
}

TEST_CASE("adnt: round trip and malformed input") {
  std::mt19937_64 rng(9);
  const Tensor t = Tensor::randn({2, 3, 4}, rng);
  const auto bytes = encode_adnt(t);
  CHECK(bytes.size() == 4 + 1 + 4 + 3 * 4 + 24 * 4);
  const Tensor back = decode_adnt(bytes);
  CHECK(back.shape() == t.shape());
  CHECK(back.to_vector() == t.to_vector());

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_adnt(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  CHECK_THROWS_AS(decode_adnt(bad), FormatError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_adnt(bad), FormatError);
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_adnt(bad), FormatError);
}

TEST_CASE("ops are deterministic") {
  auto run = [] {
    std::mt19937_64 rng(10);
    const Tensor x = Tensor::randn({2, 4, 8, 8}, rng), w = Tensor::randn({4, 4, 3, 3}, rng);
    Tensor y = instance_norm(conv2d(x, w, Tensor(), 1, 1, PadMode::reflect), Tensor::ones({4}), Tensor::zeros({4}));
    return tanh(nearest_upsample(y, 2)).to_vector();
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite forward values raise NumericError") {
  const Tensor big({2}, 3e38f);
  CHECK_THROWS_AS(add(big, big), NumericError);
}
