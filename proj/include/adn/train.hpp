#pragma once

// Unsupervised ADN training: adversarial, reconstruction, artifact
// consistency and self-reduction losses, alternating discriminator and
// generator Adam updates, and the M1-M4 ablation variants.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adn/dataset.hpp"
#include "adn/network.hpp"
#include "adn/optim.hpp"

namespace adn::train {

namespace fs = std::filesystem;
using net::AdnModel;
using net::ModelParams;
using net::TranslationBundle;

enum class Variant { M1, M2, M3, M4 };
Variant parse_variant(const std::string& s);
std::string variant_name(Variant v);

struct LossWeights {
  double adv = 1.0;
  double rec = 20.0;
  double art = 20.0;
  double self = 20.0;

  /// Full weights with the terms the variant drops set to zero:
  /// M1 adversarial only, M2 + reconstruction, M3 + artifact consistency,
  /// M4 + self-reduction.
  static LossWeights for_variant(Variant v, const LossWeights& full);
  static LossWeights for_variant(Variant v) { return for_variant(v, LossWeights{}); }
  void validate() const;
};

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 2;  // images per step, half x^a and half y
  std::int64_t steps = 2000;
  std::uint64_t seed = 0;
  Variant variant = Variant::M4;
  std::string dataset_root;
  std::int64_t checkpoint_every = 0;  // 0 = only the final checkpoint
  int base_width = 64;
  double grad_clip = 0.0;  // 0 = off

  AdamOptions adam() const { return {lr, beta1, beta2, 1e-8}; }
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Parses `key = value` lines ('#' starts a comment). Every key must be a
/// TrainConfig field and may appear at most once; omitted keys keep their
/// defaults. Errors carry the 1-based line number as the offset.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const fs::path& path);
std::string format_config(const TrainConfig& c);

// --- losses ---------------------------------------------------------------

enum class Side { generator, discriminator };

struct AdversarialLosses {
  Tensor clean;     // D_I term
  Tensor artifact;  // D_a term
};

/// Discriminator side: bce(D_I(y), 1) + bce(D_I(x_hat detached), 0) and the
/// analogue for D_a on (x^a, ya_hat). Generator side: bce(D_I(x_hat), 1) and
/// bce(D_a(ya_hat), 1). Patch logits are averaged.
AdversarialLosses adversarial_losses(const AdnModel& model, const ModelParams& p, const TranslationBundle& b,
                                     const Tensor& xa, const Tensor& y, Side side);

/// L1(xa_hat, x^a) + L1(y_hat, y).
Tensor reconstruction_loss(const TranslationBundle& b, const Tensor& xa, const Tensor& y);
/// L1((x^a - x_hat) - (ya_hat - y)).
Tensor artifact_consistency_loss(const TranslationBundle& b, const Tensor& xa, const Tensor& y);
/// L1(y_tilde, y).
Tensor self_reduction_loss(const TranslationBundle& b, const Tensor& y);

struct LossParts {
  Tensor adv_clean;
  Tensor adv_artifact;
  Tensor rec;
  Tensor art;
  Tensor self;
};

/// adv (adv_clean + adv_artifact) + art L_art + rec L_rec + self L_self.
/// Terms with zero weight are skipped and may be left undefined; with all
/// weights zero the result is a constant 0.
Tensor total_loss(const LossParts& parts, const LossWeights& w);

/// Generator-side parts for a bundle. Terms with zero weight are still
/// evaluated for reporting, but without recording a graph.
LossParts generator_parts(const AdnModel& model, const ModelParams& p, const TranslationBundle& b, const Tensor& xa,
                          const Tensor& y, const LossWeights& w);

// --- state and stepping ---------------------------------------------------

struct LossReport {
  std::int64_t step = 0;
  float adv_clean = 0;     // generator side, D_I
  float adv_artifact = 0;  // generator side, D_a
  float rec = 0;
  float art = 0;
  float self = 0;
  float gen_total = 0;
  float disc_clean = 0;
  float disc_artifact = 0;

  bool operator==(const LossReport&) const = default;
  /// (name, value) pairs in log order.
  std::vector<std::pair<std::string, float>> fields() const;
};

struct TrainState {
  net::ArchConfig arch;
  ModelParams params;
  AdamState gen_opt;
  AdamState disc_opt;
  std::int64_t step = 0;  // completed steps

  static TrainState fresh(const net::ArchConfig& arch, std::uint64_t seed);
  std::vector<std::string> generator_names() const;
  std::vector<std::string> discriminator_names() const;
};

/// Raised when a step produces a non-finite value. Carries what is needed
/// to reproduce the failure.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, std::int64_t step, std::uint64_t seed, data::Batch batch)
      : NumericError(what), step_(step), seed_(seed), batch_(std::move(batch)) {}
  std::int64_t step() const { return step_; }
  std::uint64_t seed() const { return seed_; }
  const data::Batch& batch() const { return batch_; }

 private:
  std::int64_t step_;
  std::uint64_t seed_;
  data::Batch batch_;
};

/// One discriminator update (both D) followed by one generator update (all E
/// and G) on a shared forward pass. Increments state.step.
LossReport train_step(const AdnModel& model, TrainState& state, const data::Batch& batch, const TrainConfig& cfg);

// --- checkpoints ----------------------------------------------------------

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// ADNC: "ADNC", u8 version, u32 count, then per entry u16 name length,
/// name, u32 rank, u32 dims, f32 data; entries sorted by name. Optimizer
/// moments and step counters follow under the "opt/" prefix.
std::vector<std::uint8_t> encode_checkpoint(const TrainState& state, bool with_optimizer = true);
TrainState decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const TrainState& state, const fs::path& path, bool with_optimizer = true);
TrainState load_checkpoint(const fs::path& path);

// --- loop -----------------------------------------------------------------

struct RunOptions {
  fs::path out_dir;
  std::optional<fs::path> resume;
  /// Called after each step; return false to stop early.
  std::function<bool(const LossReport&)> on_step;
};

/// Trains from cfg.dataset_root up to cfg.steps, appending to
/// out_dir/loss.tsv, writing out_dir/step_<n>.adnc every checkpoint_every
/// steps and out_dir/final.adnc at the end. A resumed run truncates the log
/// to the checkpoint's step first. On TrainingAborted, writes
/// out_dir/abort/ (inputs and info.txt) and rethrows.
TrainState run_training(const TrainConfig& cfg, const RunOptions& opts);

/// Formats a float so that parsing it back yields the same bits.
std::string format_float(float v);

}  // namespace adn::train
