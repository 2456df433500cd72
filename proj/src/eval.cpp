#include "adn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "adn/dataset.hpp"
#include "adn/metrics.hpp"
#include "adn/parallel.hpp"
#include "adn/train.hpp"

namespace adn::eval {

Method parse_method(const std::string& s) {
  if (s == "adn") return Method::adn;
  if (s == "li") return Method::li;
  if (s == "nmar") return Method::nmar;
  if (s == "identity") return Method::identity;
  throw ArgumentError("unknown method '" + s + "' (expected adn, li, nmar or identity)");
}

std::string method_name(Method m) {
  static const char* names[] = {"adn", "li", "nmar", "identity"};
  return names[static_cast<int>(m)];
}

Inference Inference::from_checkpoint(const fs::path& path) {
  train::TrainState s = train::load_checkpoint(path);
  return {net::AdnModel(s.arch), std::move(s.params)};
}

Tensor Inference::remove_artifacts(const Tensor& artifact_hu) const {
  return unit_to_hu(as_image(model.remove_artifacts(params, as_batch(hu_to_unit(artifact_hu)))));
}

Tensor Inference::transfer_artifacts(const Tensor& artifact_hu, const Tensor& clean_hu) const {
  return unit_to_hu(as_image(
      model.transfer_artifacts(params, as_batch(hu_to_unit(artifact_hu)), as_batch(hu_to_unit(clean_hu)))));
}

Tensor correct(const Tensor& artifact_hu, const Mask& metal, Method method, const Inference* model) {
  switch (method) {
    case Method::identity:
      return artifact_hu.clone();
    case Method::li:
      return mar::reconstruct_baseline(artifact_hu, mar::Method::li);
    case Method::nmar:
      return mar::reconstruct_baseline(artifact_hu, mar::Method::nmar);
    case Method::adn:
      if (!model) throw ArgumentError("adn evaluation needs a checkpoint");
      return restamp(model->remove_artifacts(artifact_hu), artifact_hu, metal);
  }
  throw ArgumentError("unknown method");
}

EvalRecord score(const std::string& id, const std::string& method, const Tensor& estimate, const Tensor& clean,
                 const Mask& metal) {
  const Tensor a = hu_to_metric(estimate), b = hu_to_metric(clean);
  return {id, method, psnr(a, b, metal), 100.0 * ssim(a, b, metal)};
}

EvalResult run_eval(const fs::path& root, Method method, const Inference* model) {
  if (method == Method::adn && !model) throw ArgumentError("adn evaluation needs a checkpoint");
  const fs::path dir = root / data::group_name(data::Group::test);
  EvalResult result;
  std::vector<std::string> ids;
  for (const auto& id : data::list_group(root, data::Group::test)) {
    const bool complete = fs::exists(dir / (id + "_x.adnt")) && fs::exists(dir / (id + "_mask.adnt"));
    (complete ? ids : result.missing).push_back(id);
  }
  if (ids.empty()) throw std::runtime_error("no complete test pairs under " + dir.string());

  result.rows.resize(ids.size());
  const std::string name = method_name(method);
  parallel_for(ids.size(), [&](std::size_t i) {
    const data::TestPair p = data::load_test_pair(root, ids[i]);
    result.rows[i] = score(p.id, name, correct(p.artifact, p.metal_mask, method, model), p.clean, p.metal_mask);
  });

  result.summary = {"mean", name, 0.0, 0.0};
  for (const auto& r : result.rows) {
    result.summary.psnr_db += r.psnr_db;
    result.summary.ssim_x100 += r.ssim_x100;
  }
  result.summary.psnr_db /= static_cast<double>(result.rows.size());
  result.summary.ssim_x100 /= static_cast<double>(result.rows.size());
  return result;
}

std::string format_eval_tsv(const EvalResult& r) {
  std::string out = "id\tmethod\tpsnr_db\tssim_x100\n";
  char buf[256];
  auto row = [&](const EvalRecord& e) {
    std::snprintf(buf, sizeof buf, "%s\t%s\t%.6f\t%.6f\n", e.id.c_str(), e.method.c_str(), e.psnr_db, e.ssim_x100);
    out += buf;
  };
  for (const auto& e : r.rows) row(e);
  row(r.summary);
  return out;
}

void write_pgm(const fs::path& path, const Tensor& image_hu) {
  if (image_hu.rank() != 2) throw DimensionError("write_pgm: expected [H, W], got " + shape_str(image_hu.shape()));
  const auto h = image_hu.dim(0), w = image_hu.dim(1);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << w << ' ' << h << "\n65535\n";
  const Tensor unit = hu_to_metric(image_hu);
  for (float v : unit.data()) {
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f));
    const char be[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xFF)};
    out.write(be, 2);
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace adn::eval
