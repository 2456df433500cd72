#pragma once

// Artifact disentanglement network: content encoders for both domains, a
// multi-scale artifact encoder, a clean decoder, an artifact-affected decoder
// that merges the artifact pyramid at every scale, and two patch
// discriminators.
//
// Parameters live outside the model in a name-sorted map so the same model
// object can run any checkpoint. Names look like "G_a.res0.a.weight":
// network (E_I, E_c, E_a, G_I, G_a, D_I, D_a), layer, then weight, bias,
// gain or shift.

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adn/ops.hpp"
#include "adn/tensor.hpp"

namespace adn::net {

using ModelParams = std::map<std::string, Tensor>;

struct ArchConfig {
  int base_width = 64;  // channel widths are w, 2w, 4w
  int in_channels = 1;
  int residual_blocks = 4;

  bool operator==(const ArchConfig&) const = default;
};

enum class Network { E_I, E_c, E_a, G_I, G_a, D_I, D_a };
inline constexpr std::array<Network, 7> kAllNetworks{Network::E_I, Network::E_c, Network::E_a, Network::G_I,
                                                     Network::G_a, Network::D_I, Network::D_a};
std::string network_name(Network n);

/// True for parameters that belong to a discriminator.
bool is_discriminator_param(const std::string& name);

/// Artifact code: encoder block outputs at strides 1, 2, 4.
using ArtifactPyramid = std::array<Tensor, 3>;

struct LatentCodes {
  Tensor c_x;  // content of x^a
  Tensor c_y;  // content of y
  ArtifactPyramid a;
};

struct TranslationBundle {
  Tensor x_hat;    // G_I(c_x): artifact-reduced x^a
  Tensor y_hat;    // G_I(c_y): reconstruction of y
  Tensor xa_hat;   // G_a(c_x, a): reconstruction of x^a
  Tensor ya_hat;   // G_a(c_y, a): y with x^a's artifacts
  Tensor y_tilde;  // G_I(E_c(ya_hat)): self-reduction
  LatentCodes codes;
};

/// Per-network invocation counters (test instrumentation).
class CallCounts {
 public:
  CallCounts() = default;
  CallCounts(const CallCounts& other) { *this = other; }
  CallCounts& operator=(const CallCounts& other) {
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] = other.counts_[i].load();
    return *this;
  }
  int operator[](Network n) const { return counts_[static_cast<std::size_t>(n)].load(); }
  void bump(Network n) { ++counts_[static_cast<std::size_t>(n)]; }
  void reset() {
    for (auto& c : counts_) c = 0;
  }

 private:
  std::array<std::atomic<int>, kAllNetworks.size()> counts_{};
};

class AdnModel {
 public:
  explicit AdnModel(ArchConfig arch = {});

  const ArchConfig& arch() const { return arch_; }

  /// Fresh parameters: conv weights ~ N(0, 0.02), biases 0, norm gain 1 and
  /// shift 0. Deterministic in seed.
  ModelParams init_params(std::uint64_t seed) const;
  /// Expected name -> shape table for this architecture.
  std::map<std::string, Shape> param_shapes() const;
  /// Throws DimensionError unless `params` matches param_shapes() exactly.
  void check_params(const ModelParams& params) const;

  Tensor encode_clean(const ModelParams& p, const Tensor& y) const;
  Tensor encode_content(const ModelParams& p, const Tensor& xa) const;
  ArtifactPyramid encode_artifact(const ModelParams& p, const Tensor& xa) const;
  Tensor decode_clean(const ModelParams& p, const Tensor& code) const;
  Tensor decode_artifact(const ModelParams& p, const Tensor& code, const ArtifactPyramid& a) const;

  enum class Domain { clean, artifact };
  /// Un-squashed patch logits from D_I (clean) or D_a (artifact).
  Tensor discriminate(const ModelParams& p, const Tensor& image, Domain which) const;

  TranslationBundle forward_translations(const ModelParams& p, const Tensor& xa, const Tensor& y) const;
  /// G_I(E_c(x^a)) without graph recording.
  Tensor remove_artifacts(const ModelParams& p, const Tensor& xa) const;
  /// G_a(E_I(y), E_a(x^a)) without graph recording.
  Tensor transfer_artifacts(const ModelParams& p, const Tensor& xa, const Tensor& y) const;

  const CallCounts& call_counts() const { return counts_; }
  void reset_call_counts() { counts_.reset(); }

 private:
  struct LayerSpec {
    int cin, cout, kernel, stride, padding;
    bool norm;
    PadMode pad;
  };
  void add_layer(const std::string& name, LayerSpec spec);
  // Convolution (+ instance norm when the layer has one); no activation.
  Tensor layer(const ModelParams& p, const std::string& name, const Tensor& x) const;
  Tensor residual_stack(const ModelParams& p, const std::string& net, Tensor x) const;
  Tensor content_encoder(const ModelParams& p, const std::string& net, const Tensor& x) const;
  void check_image(const Tensor& x, const char* op) const;
  void check_code(const Tensor& code, const char* op) const;

  ArchConfig arch_;
  std::map<std::string, LayerSpec> layers_;
  mutable CallCounts counts_;
};

}  // namespace adn::net
