#pragma once

// Test-split evaluation: correct every artifact image with one method,
// re-stamp the metal region from the input, and score masked PSNR/SSIM
// against the clean image on the [0, 1] metric window.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adn/baselines.hpp"
#include "adn/network.hpp"

namespace adn::eval {

namespace fs = std::filesystem;

enum class Method { adn, li, nmar, identity };
Method parse_method(const std::string& s);
std::string method_name(Method m);

struct EvalRecord {
  std::string id;
  std::string method;
  double psnr_db = 0.0;
  double ssim_x100 = 0.0;
};

struct EvalResult {
  std::vector<EvalRecord> rows;  // sorted by id
  EvalRecord summary;            // id "mean"
  std::vector<std::string> missing;  // test ids skipped for missing files
};

/// A trained model ready for inference.
struct Inference {
  net::AdnModel model;
  net::ModelParams params;

  static Inference from_checkpoint(const fs::path& path);
  /// HU in, HU out: G_I(E_c(x^a)) on the [-1, 1] window.
  Tensor remove_artifacts(const Tensor& artifact_hu) const;
  /// HU in, HU out: G_a(E_I(y), E_a(x^a)).
  Tensor transfer_artifacts(const Tensor& artifact_hu, const Tensor& clean_hu) const;
};

/// Corrected HU image with the metal region copied back from the input.
/// `model` is required for Method::adn.
Tensor correct(const Tensor& artifact_hu, const Mask& metal, Method method, const Inference* model = nullptr);

/// Masked PSNR (dB) and SSIM x100 of `estimate` against `clean`, both HU.
EvalRecord score(const std::string& id, const std::string& method, const Tensor& estimate, const Tensor& clean,
                 const Mask& metal);

/// Evaluates every test pair under `root`. Work is spread over samples;
/// row order is fixed by id.
EvalResult run_eval(const fs::path& root, Method method, const Inference* model = nullptr);

/// `id\tmethod\tpsnr_db\tssim_x100`, one row per sample, then the mean row.
std::string format_eval_tsv(const EvalResult& r);

/// 16-bit binary PGM of an HU image over the [-1000, 2000] HU window.
void write_pgm(const fs::path& path, const Tensor& image_hu);

}  // namespace adn::eval
