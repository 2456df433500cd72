#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "adn/dataset.hpp"
#include "adn/rng.hpp"
#include "adn/train.hpp"

using namespace adn;
using namespace adn::train;
namespace fs = std::filesystem;

namespace {

Tensor rand_img(std::uint64_t seed, Shape s = {1, 1, 2, 2}) {
  std::mt19937_64 rng(seed);
  return Tensor::uniform(std::move(s), rng, -1.0f, 1.0f);
}

Tensor vec(Shape s, std::vector<float> v) { return Tensor(std::move(s), std::move(v)); }

// A 20-image toy dataset at 32x32, written once per process.
const fs::path& toy_root() {
  static const fs::path root = [] {
    const fs::path r = fs::temp_directory_path() / ("adn_test_train_" + std::to_string(::getpid()));
    fs::remove_all(r);
    data::DatasetSpec spec;
    spec.train_count = 20;
    spec.test_count = 2;
    spec.size = 32;
    spec.seed = 5;
    data::write_dataset(r, spec);
    return r;
  }();
  return root;
}

struct Cleanup {
  ~Cleanup() {
    std::error_code ec;
    fs::remove_all(fs::temp_directory_path() / ("adn_test_train_" + std::to_string(::getpid())), ec);
  }
} cleanup;

TrainConfig toy_config(std::uint64_t seed) {
  TrainConfig c;
  c.base_width = 4;
  c.seed = seed;
  c.lr = 2e-3;
  c.dataset_root = toy_root().string();
  return c;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Sets every D weight and bias to zero, then the final bias to `b`, so both
// discriminators emit the constant logit b.
void constant_discriminators(ModelParams& p, float b) {
  for (auto& [name, t] : p) {
    if (!net::is_discriminator_param(name)) continue;
    for (auto& v : t.mutable_data()) v = 0.0f;
  }
  for (const char* n : {"D_I.out.bias", "D_a.out.bias"}) p.at(n).mutable_data()[0] = b;
}

std::vector<float> flat_params(const ModelParams& p, bool discriminator) {
  std::vector<float> out;
  for (const auto& [name, t] : p) {
    if (net::is_discriminator_param(name) == discriminator) out.insert(out.end(), t.data().begin(), t.data().end());
  }
  return out;
}

}  // namespace

TEST_CASE("adversarial: zero logits give log 2 per term") {
  const AdnModel m({4, 1, 1});
  ModelParams p = m.init_params(1);
  constant_discriminators(p, 0.0f);
  const Tensor xa = rand_img(1, {1, 1, 16, 16}), y = rand_img(2, {1, 1, 16, 16});
  const auto b = m.forward_translations(p, xa, y);
  const auto g = adversarial_losses(m, p, b, xa, y, Side::generator);
  CHECK(g.clean.item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(g.artifact.item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  const auto d = adversarial_losses(m, p, b, xa, y, Side::discriminator);
  CHECK(d.clean.item() == doctest::Approx(2 * std::log(2.0)).epsilon(1e-6));
  CHECK(d.artifact.item() == doctest::Approx(2 * std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("adversarial: constant-logit toy discriminator matches hand bce") {
  const AdnModel m({4, 1, 1});
  ModelParams p = m.init_params(2);
  const float b = 0.75f;
  constant_discriminators(p, b);
  const Tensor xa = rand_img(3, {1, 1, 16, 16}), y = rand_img(4, {1, 1, 16, 16});
  REQUIRE(m.discriminate(p, y, AdnModel::Domain::clean).shape() == Shape{1, 1, 2, 2});
  const auto bundle = m.forward_translations(p, xa, y);
  const double real = std::log(1.0 + std::exp(-0.75)), fake = std::log(1.0 + std::exp(0.75));
  const auto g = adversarial_losses(m, p, bundle, xa, y, Side::generator);
  const auto d = adversarial_losses(m, p, bundle, xa, y, Side::discriminator);
  CHECK(std::abs(g.clean.item() - real) < 1e-6);
  CHECK(std::abs(g.artifact.item() - real) < 1e-6);
  CHECK(std::abs(d.clean.item() - (real + fake)) < 1e-6);
  CHECK(std::abs(d.artifact.item() - (real + fake)) < 1e-6);
}

TEST_CASE("adversarial: the discriminator side does not reach generator parameters") {
  const AdnModel m({4, 1, 1});
  const ModelParams p = m.init_params(3);
  const Tensor xa = rand_img(5, {2, 1, 16, 16}), y = rand_img(6, {2, 1, 16, 16});
  const auto b = m.forward_translations(p, xa, y);
  const auto d = adversarial_losses(m, p, b, xa, y, Side::discriminator);
  backward(add(d.clean, d.artifact));
  for (const auto& [name, t] : p) {
    CAPTURE(name);
    CHECK(t.has_grad() == net::is_discriminator_param(name));
  }
}

TEST_CASE("reconstruction loss: zero point, hand value, symmetry") {
  TranslationBundle b;
  const Tensor xa = vec({1, 1, 2, 2}, {1, 2, 3, 4}), y = vec({1, 1, 2, 2}, {0, 0, 1, 1});
  b.xa_hat = xa.clone();
  b.y_hat = y.clone();
  CHECK(reconstruction_loss(b, xa, y).item() == 0.0f);
  b.xa_hat = vec({1, 1, 2, 2}, {1, 1, 1, 1});
  b.y_hat = vec({1, 1, 2, 2}, {0.5f, -0.5f, 1, 2});
  // (0 + 1 + 2 + 3) / 4 + (0.5 + 0.5 + 0 + 1) / 4
  CHECK(reconstruction_loss(b, xa, y).item() == doctest::Approx(2.0));
  TranslationBundle swapped;
  swapped.xa_hat = xa;
  swapped.y_hat = y;
  CHECK(reconstruction_loss(swapped, b.xa_hat, b.y_hat).item() == reconstruction_loss(b, xa, y).item());
}

TEST_CASE("artifact consistency: zero points, shift invariance, direct formula") {
  // Images on a 1/1024 grid, so every shifted residual below is exact.
  auto grid = [](Tensor t) {
    for (auto& v : t.mutable_data()) v = std::round(v * 1024.0f) / 1024.0f;
    return t;
  };
  const Tensor xa = grid(rand_img(7, {2, 1, 4, 4})), y = grid(rand_img(8, {2, 1, 4, 4}));
  TranslationBundle b;
  b.x_hat = xa.clone();
  b.ya_hat = y.clone();
  CHECK(artifact_consistency_loss(b, xa, y).item() == 0.0f);
  for (float delta : {0.25f, -0.5f, 1.0f}) {
    b.x_hat = add(xa, Tensor(xa.shape(), -delta));
    b.ya_hat = add(y, Tensor(y.shape(), delta));
    CHECK(artifact_consistency_loss(b, xa, y).item() == 0.0f);
  }
  b.x_hat = rand_img(9, {2, 1, 4, 4});
  b.ya_hat = rand_img(10, {2, 1, 4, 4});
  double acc = 0.0;
  for (std::size_t i = 0; i < xa.numel(); ++i) {
    acc += std::abs((static_cast<double>(xa.data()[i]) - b.x_hat.data()[i]) -
                    (static_cast<double>(b.ya_hat.data()[i]) - y.data()[i]));
  }
  CHECK(artifact_consistency_loss(b, xa, y).item() == doctest::Approx(acc / xa.numel()).epsilon(1e-6));
}

TEST_CASE("self-reduction: zero point, hand value, nonnegative") {
  TranslationBundle b;
  const Tensor y = vec({1, 1, 2, 2}, {0, 1, 2, 3});
  b.y_tilde = y.clone();
  CHECK(self_reduction_loss(b, y).item() == 0.0f);
  b.y_tilde = vec({1, 1, 2, 2}, {1, 1, 0, 3});
  CHECK(self_reduction_loss(b, y).item() == doctest::Approx(0.75));
  for (std::uint64_t s = 0; s < 20; ++s) {
    b.y_tilde = rand_img(s, {1, 1, 3, 3});
    CHECK(self_reduction_loss(b, rand_img(s + 100, {1, 1, 3, 3})).item() >= 0.0f);
  }
}

TEST_CASE("total loss: weighting and variant masking") {
  const Tensor one = Tensor::scalar(1.0f);
  const LossParts unit{one, one, one, one, one};
  // 1 * (1 + 1) + 20 + 20 + 20
  CHECK(total_loss(unit, LossWeights{}).item() == 62.0f);
  CHECK(total_loss(unit, LossWeights::for_variant(Variant::M4)).item() == 62.0f);
  CHECK(total_loss(unit, LossWeights::for_variant(Variant::M3)).item() == 42.0f);
  CHECK(total_loss(unit, LossWeights::for_variant(Variant::M2)).item() == 22.0f);
  CHECK(total_loss(unit, LossWeights::for_variant(Variant::M1)).item() == 2.0f);
  CHECK(total_loss(unit, LossWeights{0, 0, 0, 0}).item() == 0.0f);

  const LossParts parts{Tensor::scalar(0.5f), Tensor::scalar(0.25f), Tensor::scalar(3.0f), Tensor::scalar(7.0f),
                        Tensor::scalar(11.0f)};
  CHECK(total_loss(parts, LossWeights::for_variant(Variant::M1)).item() == 0.75f);
  const LossParts adv_only{Tensor::scalar(0.5f), Tensor::scalar(0.25f), Tensor(), Tensor(), Tensor()};
  CHECK(total_loss(adv_only, LossWeights::for_variant(Variant::M1)).item() == 0.75f);
  CHECK(total_loss(parts, LossWeights{2.0, 0.5, 0.25, 0.125}).item() == doctest::Approx(2 * 0.75 + 1.5 + 1.75 + 1.375));

  LossWeights bad;
  bad.rec = -1;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("generator parts: zero-weight terms are reported without a graph") {
  const AdnModel m({4, 1, 1});
  const ModelParams p = m.init_params(4);
  const Tensor xa = rand_img(11, {1, 1, 16, 16}), y = rand_img(12, {1, 1, 16, 16});
  const auto b = m.forward_translations(p, xa, y);
  const auto parts = generator_parts(m, p, b, xa, y, LossWeights::for_variant(Variant::M1));
  CHECK(parts.adv_clean.requires_grad());
  CHECK_FALSE(parts.rec.requires_grad());
  CHECK_FALSE(parts.art.requires_grad());
  CHECK_FALSE(parts.self.requires_grad());
  CHECK(parts.rec.item() == doctest::Approx(reconstruction_loss(b, xa, y).item()));
  CHECK(parts.self.item() == doctest::Approx(self_reduction_loss(b, y).item()));
}

TEST_CASE("train_step: deterministic") {
  const data::UnpairedSampler sampler(toy_root());
  const auto cfg = toy_config(1);
  const AdnModel m({4, 1, 4});
  auto run = [&] {
    TrainState s = TrainState::fresh(m.arch(), 9);
    std::vector<LossReport> out;
    for (int k = 0; k < 3; ++k) out.push_back(train_step(m, s, sampler.draw(3, s.step, 2), cfg));
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("optimizer partitioning: each update touches only its own networks") {
  const data::UnpairedSampler sampler(toy_root());
  const auto cfg = toy_config(2);
  const AdnModel m({4, 1, 4});
  TrainState s = TrainState::fresh(m.arch(), 10);
  const auto batch = sampler.draw(1, 0, 2);
  for (const auto& n : s.discriminator_names()) CHECK(net::is_discriminator_param(n));
  for (const auto& n : s.generator_names()) CHECK_FALSE(net::is_discriminator_param(n));
  CHECK(s.generator_names().size() + s.discriminator_names().size() == s.params.size());

  auto gather = [&](const std::vector<std::string>& names) {
    std::vector<Tensor> out;
    for (const auto& n : names) out.push_back(s.params.at(n));
    return out;
  };
  const auto gen0 = flat_params(s.params, false), disc0 = flat_params(s.params, true);

  const auto b = m.forward_translations(s.params, batch.artifact, batch.clean);
  const auto d = adversarial_losses(m, s.params, b, batch.artifact, batch.clean, Side::discriminator);
  backward(add(d.clean, d.artifact));
  auto disc = gather(s.discriminator_names());
  adam_step(disc, s.disc_opt, cfg.adam());
  CHECK(flat_params(s.params, false) == gen0);
  const auto disc1 = flat_params(s.params, true);
  CHECK(disc1 != disc0);
  for (auto& [n, t] : s.params) t.zero_grad();

  const auto w = LossWeights::for_variant(Variant::M4);
  backward(total_loss(generator_parts(m, s.params, b, batch.artifact, batch.clean, w), w));
  auto gen = gather(s.generator_names());
  adam_step(gen, s.gen_opt, cfg.adam());
  CHECK(flat_params(s.params, true) == disc1);
  CHECK(flat_params(s.params, false) != gen0);

  TrainState t = TrainState::fresh(m.arch(), 10);
  train_step(m, t, batch, cfg);
  CHECK(t.step == 1);
  CHECK(flat_params(t.params, false) != gen0);
  CHECK(flat_params(t.params, true) != disc0);
  CHECK(t.gen_opt.step == 1);
  CHECK(t.disc_opt.step == 1);
}

TEST_CASE("train_step: non-finite input aborts with a snapshot") {
  const auto cfg = toy_config(3);
  const AdnModel m({4, 1, 1});
  TrainState s = TrainState::fresh(m.arch(), 1);
  data::Batch batch{rand_img(1, {1, 1, 16, 16}), rand_img(2, {1, 1, 16, 16}), {"a"}, {"b"}};
  batch.artifact.mutable_data()[5] = std::nanf("");
  try {
    train_step(m, s, batch, cfg);
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    CHECK(e.step() == 1);
    CHECK(e.seed() == 3);
    CHECK(e.batch().artifact_ids == std::vector<std::string>{"a"});
  }
  CHECK(s.step == 0);
}

TEST_CASE("smoke training: generator loss falls over 200 steps") {
  const data::UnpairedSampler sampler(toy_root());
  const AdnModel m({4, 1, 4});
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto cfg = toy_config(seed);
    TrainState s = TrainState::fresh(m.arch(), mix_seed(seed, 0));
    float first = 0, last = 0;
    for (int k = 0; k < 200; ++k) {
      const auto r = train_step(m, s, sampler.draw(mix_seed(seed, 1), s.step, 2), cfg);
      if (k == 0) first = r.gen_total;
      last = r.gen_total;
    }
    MESSAGE("seed " << seed << ": " << first << " -> " << last);
    improved += last < first;
  }
  CHECK(improved >= 4);
}

TEST_CASE("checkpoint: byte-identical round trip with and without optimizer state") {
  const data::UnpairedSampler sampler(toy_root());
  const AdnModel m({4, 1, 2});
  TrainState s = TrainState::fresh(m.arch(), 3);
  for (int k = 0; k < 2; ++k) train_step(m, s, sampler.draw(1, s.step, 2), toy_config(0));
  const auto bytes = encode_checkpoint(s);
  const TrainState back = decode_checkpoint(bytes);
  CHECK(encode_checkpoint(back) == bytes);
  CHECK(back.arch == s.arch);
  CHECK(back.step == 2);
  CHECK(back.gen_opt.step == 2);
  for (const auto& [name, t] : s.params) CHECK(back.params.at(name).to_vector() == t.to_vector());

  const auto slim = encode_checkpoint(s, false);
  CHECK(slim.size() < bytes.size());
  CHECK(encode_checkpoint(decode_checkpoint(slim), false) == slim);

  const fs::path path = toy_root() / "rt.adnc";
  save_checkpoint(s, path);
  CHECK(encode_checkpoint(load_checkpoint(path)) == bytes);
}

TEST_CASE("checkpoint: malformed bytes raise FormatError") {
  const TrainState s = TrainState::fresh({4, 1, 1}, 1);
  const auto bytes = encode_checkpoint(s);
  auto expect_format_error = [](std::vector<std::uint8_t> b, std::uint64_t offset) {
    try {
      decode_checkpoint(b);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == offset);
    }
  };
  auto bad = bytes;
  bad[1] = 'X';
  expect_format_error(bad, 0);
  bad = bytes;
  bad[4] = 9;
  expect_format_error(bad, 4);

  // Entry count, first name length and first rank, each inflated.
  for (std::size_t at : {std::size_t{5}, std::size_t{9}}) {
    bad = bytes;
    bad[at + 1] = 0x7f;
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  }
  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(decode_checkpoint(std::span(bytes).first(cut)), FormatError);
  }
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    bad = bytes;
    bad[std::uniform_int_distribution<std::size_t>(0, 200)(rng)] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    try {
      decode_checkpoint(bad);
    } catch (const FormatError&) {
    }
  }
}

TEST_CASE("resume reproduces the uninterrupted loss trace") {
  auto cfg = toy_config(4);
  cfg.steps = 10;
  cfg.checkpoint_every = 5;
  const fs::path a = toy_root() / "run_a", b = toy_root() / "run_b";
  run_training(cfg, {a, std::nullopt, nullptr});
  fs::create_directories(b);
  fs::copy_file(a / "loss.tsv", b / "loss.tsv");
  run_training(cfg, {b, a / "step_0000005.adnc", nullptr});
  CHECK(read_text(a / "loss.tsv") == read_text(b / "loss.tsv"));
  CHECK(read_text(a / "final.adnc") == read_text(b / "final.adnc"));
  const std::string log = read_text(a / "loss.tsv");
  CHECK(log.rfind("step\tname\tvalue\n", 0) == 0);
  CHECK(log.find("10\tgen_total\t") != std::string::npos);

  auto other = cfg;
  other.base_width = 8;
  CHECK_THROWS_AS(run_training(other, {b, a / "step_0000005.adnc", nullptr}), ArgumentError);
}

TEST_CASE("config: parse, format round trip and errors") {
  const auto c = parse_config("# comment\nlr = 0.0002\nbeta1=0.5\n\nsteps = 30  # trailing\nvariant = M2\nbase_width = 16\n");
  CHECK(c.lr == 0.0002);
  CHECK(c.steps == 30);
  CHECK(c.variant == Variant::M2);
  CHECK(c.base_width == 16);
  CHECK(c.batch_size == 2);
  CHECK(parse_config(format_config(c)) == c);

  auto line_of = [](const std::string& text) -> std::uint64_t {
    try {
      parse_config(text);
    } catch (const FormatError& e) {
      return e.offset();
    }
    return 0;
  };
  CHECK(line_of("lr = 1e-4\nbogus = 3\n") == 2);
  CHECK(line_of("lr = 1e-4\n\nlr = 2e-4\n") == 3);
  CHECK(line_of("steps = ten\n") == 1);
  CHECK(line_of("no equals sign\n") == 1);
  CHECK(line_of("variant = M7\n") == 1);
  CHECK_THROWS_AS(parse_config("batch_size = 3\n").validate(), ArgumentError);
  CHECK_THROWS_AS(parse_config("lr = -1\n").validate(), ArgumentError);
}

TEST_CASE("variant names and loss-weight masks") {
  for (auto v : {Variant::M1, Variant::M2, Variant::M3, Variant::M4}) CHECK(parse_variant(variant_name(v)) == v);
  CHECK_THROWS_AS(parse_variant("M5"), ArgumentError);
  const auto m1 = LossWeights::for_variant(Variant::M1);
  CHECK(m1.adv == 1.0);
  CHECK(m1.rec == 0.0);
  CHECK(m1.art == 0.0);
  CHECK(m1.self == 0.0);
  const auto m3 = LossWeights::for_variant(Variant::M3);
  CHECK(m3.art == 20.0);
  CHECK(m3.self == 0.0);
}

TEST_CASE("format_float round-trips bits") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 1000; ++k) {
    const float v = std::ldexp(std::uniform_real_distribution<float>(-1, 1)(rng), static_cast<int>(rng() % 60) - 30);
    CHECK(std::stof(format_float(v)) == v);
  }
}
