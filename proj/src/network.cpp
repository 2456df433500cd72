#include "adn/network.hpp"

#include <random>

namespace adn::net {

namespace {

const char* kNames[] = {"E_I", "E_c", "E_a", "G_I", "G_a", "D_I", "D_a"};

const Tensor& lookup(const ModelParams& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw DimensionError("missing parameter '" + name + "'");
  return it->second;
}

}  // namespace

std::string network_name(Network n) { return kNames[static_cast<std::size_t>(n)]; }

bool is_discriminator_param(const std::string& name) { return name.rfind("D_", 0) == 0; }

AdnModel::AdnModel(ArchConfig arch) : arch_(arch) {
  if (arch_.base_width < 1 || arch_.in_channels < 1 || arch_.residual_blocks < 0) {
    throw ArgumentError("AdnModel: invalid architecture config");
  }
  const int w = arch_.base_width, c = arch_.in_channels, nres = arch_.residual_blocks;
  const PadMode R = PadMode::reflect;

  for (const char* enc : {"E_I", "E_c", "E_a"}) {
    const std::string e = enc;
    add_layer(e + ".down0", {c, w, 7, 1, 3, true, R});
    add_layer(e + ".down1", {w, 2 * w, 4, 2, 1, true, R});
    add_layer(e + ".down2", {2 * w, 4 * w, 4, 2, 1, true, R});
  }
  for (const char* net : {"E_I", "E_c", "G_I", "G_a"}) {
    for (int i = 0; i < nres; ++i) {
      const std::string r = std::string(net) + ".res" + std::to_string(i);
      add_layer(r + ".a", {4 * w, 4 * w, 3, 1, 1, true, R});
      add_layer(r + ".b", {4 * w, 4 * w, 3, 1, 1, true, R});
    }
  }
  for (const char* dec : {"G_I", "G_a"}) {
    const std::string g = dec;
    add_layer(g + ".up0", {4 * w, 2 * w, 5, 1, 2, true, R});
    add_layer(g + ".up1", {2 * w, w, 5, 1, 2, true, R});
    add_layer(g + ".final", {w, c, 7, 1, 3, false, R});
  }
  add_layer("G_a.merge0", {8 * w, 4 * w, 1, 1, 0, true, R});
  add_layer("G_a.merge1", {4 * w, 2 * w, 1, 1, 0, true, R});
  add_layer("G_a.merge2", {2 * w, w, 1, 1, 0, true, R});
  for (const char* dis : {"D_I", "D_a"}) {
    const std::string d = dis;
    add_layer(d + ".conv0", {c, w, 4, 2, 1, false, PadMode::zero});
    add_layer(d + ".down1", {w, 2 * w, 4, 2, 1, false, PadMode::zero});
    add_layer(d + ".down2", {2 * w, 4 * w, 4, 1, 1, false, PadMode::zero});
    add_layer(d + ".out", {4 * w, 1, 4, 1, 1, false, PadMode::zero});
  }
}

void AdnModel::add_layer(const std::string& name, LayerSpec spec) { layers_.emplace(name, spec); }

std::map<std::string, Shape> AdnModel::param_shapes() const {
  std::map<std::string, Shape> shapes;
  for (const auto& [name, s] : layers_) {
    shapes[name + ".weight"] = {s.cout, s.cin, s.kernel, s.kernel};
    shapes[name + ".bias"] = {s.cout};
    if (s.norm) {
      shapes[name + ".gain"] = {s.cout};
      shapes[name + ".shift"] = {s.cout};
    }
  }
  return shapes;
}

ModelParams AdnModel::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ModelParams p;
  for (const auto& [name, shape] : param_shapes()) {
    Tensor t;
    if (name.ends_with(".weight")) {
      t = Tensor::randn(shape, rng, 0.02f);
    } else if (name.ends_with(".gain")) {
      t = Tensor::ones(shape);
    } else {
      t = Tensor::zeros(shape);
    }
    t.set_requires_grad(true);
    p.emplace(name, std::move(t));
  }
  return p;
}

void AdnModel::check_params(const ModelParams& params) const {
  const auto shapes = param_shapes();
  if (shapes.size() != params.size()) {
    throw DimensionError("parameter set has " + std::to_string(params.size()) + " entries, architecture expects " +
                         std::to_string(shapes.size()));
  }
  for (const auto& [name, shape] : shapes) {
    const Tensor& t = lookup(params, name);
    if (t.shape() != shape) {
      throw DimensionError("parameter '" + name + "' has shape " + shape_str(t.shape()) + ", expected " +
                           shape_str(shape));
    }
  }
}

Tensor AdnModel::layer(const ModelParams& p, const std::string& name, const Tensor& x) const {
  const LayerSpec& s = layers_.at(name);
  Tensor y = conv2d(x, lookup(p, name + ".weight"), lookup(p, name + ".bias"), s.stride, s.padding, s.pad);
  if (s.norm) y = instance_norm(y, lookup(p, name + ".gain"), lookup(p, name + ".shift"));
  return y;
}

Tensor AdnModel::residual_stack(const ModelParams& p, const std::string& net, Tensor x) const {
  for (int i = 0; i < arch_.residual_blocks; ++i) {
    const std::string r = net + ".res" + std::to_string(i);
    Tensor h = relu(layer(p, r + ".a", x));
    x = add(x, layer(p, r + ".b", h));
  }
  return x;
}

void AdnModel::check_image(const Tensor& x, const char* op) const {
  if (x.rank() != 4 || x.dim(1) != arch_.in_channels) {
    throw DimensionError(std::string(op) + ": expected [N, " + std::to_string(arch_.in_channels) +
                         ", H, W], got " + shape_str(x.shape()));
  }
  if (x.dim(2) % 4 != 0 || x.dim(3) % 4 != 0) {
    throw ArgumentError(std::string(op) + ": spatial size must be divisible by 4, got " + shape_str(x.shape()));
  }
}

void AdnModel::check_code(const Tensor& code, const char* op) const {
  if (code.rank() != 4 || code.dim(1) != 4 * arch_.base_width) {
    throw DimensionError(std::string(op) + ": content code must be [N, " + std::to_string(4 * arch_.base_width) +
                         ", h, w], got " + shape_str(code.shape()));
  }
}

Tensor AdnModel::content_encoder(const ModelParams& p, const std::string& net, const Tensor& x) const {
  Tensor h = relu(layer(p, net + ".down0", x));
  h = relu(layer(p, net + ".down1", h));
  h = relu(layer(p, net + ".down2", h));
  return residual_stack(p, net, h);
}

Tensor AdnModel::encode_clean(const ModelParams& p, const Tensor& y) const {
  check_image(y, "encode_clean");
  counts_.bump(Network::E_I);
  return content_encoder(p, "E_I", y);
}

Tensor AdnModel::encode_content(const ModelParams& p, const Tensor& xa) const {
  check_image(xa, "encode_content");
  counts_.bump(Network::E_c);
  return content_encoder(p, "E_c", xa);
}

ArtifactPyramid AdnModel::encode_artifact(const ModelParams& p, const Tensor& xa) const {
  check_image(xa, "encode_artifact");
  counts_.bump(Network::E_a);
  ArtifactPyramid a;
  a[0] = relu(layer(p, "E_a.down0", xa));
  a[1] = relu(layer(p, "E_a.down1", a[0]));
  a[2] = relu(layer(p, "E_a.down2", a[1]));
  return a;
}

Tensor AdnModel::decode_clean(const ModelParams& p, const Tensor& code) const {
  check_code(code, "decode_clean");
  counts_.bump(Network::G_I);
  Tensor h = residual_stack(p, "G_I", code);
  h = relu(layer(p, "G_I.up0", nearest_upsample(h, 2)));
  h = relu(layer(p, "G_I.up1", nearest_upsample(h, 2)));
  return tanh(layer(p, "G_I.final", h));
}

Tensor AdnModel::decode_artifact(const ModelParams& p, const Tensor& code, const ArtifactPyramid& a) const {
  check_code(code, "decode_artifact");
  const auto n = code.dim(0), h4 = code.dim(2), w4 = code.dim(3);
  const int w = arch_.base_width;
  const Shape expected[3] = {{n, w, 4 * h4, 4 * w4}, {n, 2 * w, 2 * h4, 2 * w4}, {n, 4 * w, h4, w4}};
  for (int i = 0; i < 3; ++i) {
    if (!a[i].defined() || a[i].shape() != expected[i]) {
      throw DimensionError("decode_artifact: pyramid level " + std::to_string(i) + " has shape " +
                           (a[i].defined() ? shape_str(a[i].shape()) : std::string("<undefined>")) + ", expected " +
                           shape_str(expected[i]));
    }
  }
  counts_.bump(Network::G_a);
  Tensor h = residual_stack(p, "G_a", code);
  h = relu(layer(p, "G_a.merge0", concat_channels(h, a[2])));
  h = relu(layer(p, "G_a.up0", nearest_upsample(h, 2)));
  h = relu(layer(p, "G_a.merge1", concat_channels(h, a[1])));
  h = relu(layer(p, "G_a.up1", nearest_upsample(h, 2)));
  h = relu(layer(p, "G_a.merge2", concat_channels(h, a[0])));
  return tanh(layer(p, "G_a.final", h));
}

Tensor AdnModel::discriminate(const ModelParams& p, const Tensor& image, Domain which) const {
  if (image.rank() != 4 || image.dim(1) != arch_.in_channels) {
    throw DimensionError("discriminate: expected [N, C, H, W], got " + shape_str(image.shape()));
  }
  if (image.dim(2) < 16 || image.dim(3) < 16) {
    throw ArgumentError("discriminate: input must be at least 16x16, got " + shape_str(image.shape()));
  }
  const Network net = which == Domain::clean ? Network::D_I : Network::D_a;
  counts_.bump(net);
  const std::string d = network_name(net);
  Tensor h = leaky_relu(layer(p, d + ".conv0", image));
  h = leaky_relu(layer(p, d + ".down1", h));
  h = leaky_relu(layer(p, d + ".down2", h));
  return layer(p, d + ".out", h);
}

TranslationBundle AdnModel::forward_translations(const ModelParams& p, const Tensor& xa, const Tensor& y) const {
  if (xa.shape() != y.shape()) {
    throw DimensionError("forward_translations: x^a " + shape_str(xa.shape()) + " and y " + shape_str(y.shape()) +
                         " differ in shape");
  }
  TranslationBundle b;
  b.codes.c_x = encode_content(p, xa);
  b.codes.a = encode_artifact(p, xa);
  b.codes.c_y = encode_clean(p, y);
  b.xa_hat = decode_artifact(p, b.codes.c_x, b.codes.a);
  b.ya_hat = decode_artifact(p, b.codes.c_y, b.codes.a);
  b.x_hat = decode_clean(p, b.codes.c_x);
  b.y_hat = decode_clean(p, b.codes.c_y);
  b.y_tilde = decode_clean(p, encode_content(p, b.ya_hat));
  return b;
}

Tensor AdnModel::remove_artifacts(const ModelParams& p, const Tensor& xa) const {
  NoGradGuard guard;
  return decode_clean(p, encode_content(p, xa));
}

Tensor AdnModel::transfer_artifacts(const ModelParams& p, const Tensor& xa, const Tensor& y) const {
  if (xa.shape() != y.shape()) throw DimensionError("transfer_artifacts: input shapes differ");
  NoGradGuard guard;
  return decode_artifact(p, encode_clean(p, y), encode_artifact(p, xa));
}

}  // namespace adn::net
