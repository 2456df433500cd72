#include "adn/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace adn::mar {

namespace {

const Mask& require_trace(const ct::Sinogram& sino, const char* op) {
  if (!sino.trace_mask) throw ArgumentError(std::string(op) + ": sinogram has no trace mask");
  const auto& t = *sino.trace_mask;
  if (t.rows() != sino.data.dim(0) || t.cols() != sino.data.dim(1)) {
    throw DimensionError(std::string(op) + ": trace mask shape does not match sinogram");
  }
  return t;
}

}  // namespace

ct::Sinogram li_inpaint(const ct::Sinogram& sino) {
  const Mask& trace = require_trace(sino, "li_inpaint");
  ct::Sinogram out = sino;
  out.data = sino.data.clone();
  out.fallback_rows = 0;
  const auto A = sino.data.dim(0), D = sino.data.dim(1);
  auto v = out.data.mutable_data();
  std::vector<std::int64_t> full_rows;
  for (std::int64_t a = 0; a < A; ++a) {
    float* row = v.data() + a * D;
    std::int64_t j = 0;
    bool any_clear = false;
    for (std::int64_t k = 0; k < D; ++k) any_clear = any_clear || !trace(a, k);
    if (!any_clear) {
      full_rows.push_back(a);
      continue;
    }
    while (j < D) {
      if (!trace(a, j)) {
        ++j;
        continue;
      }
      const std::int64_t start = j;
      while (j < D && trace(a, j)) ++j;
      const std::int64_t left = start - 1, right = j;
      if (left >= 0 && right < D) {
        const double vl = row[left], vr = row[right];
        const double span = static_cast<double>(right - left);
        for (std::int64_t k = start; k < right; ++k) row[k] = static_cast<float>(vl + (vr - vl) * (k - left) / span);
      } else {
        const float fill = left >= 0 ? row[left] : row[right];
        for (std::int64_t k = start; k < right; ++k) row[k] = fill;
      }
    }
  }
  if (static_cast<std::int64_t>(full_rows.size()) == A) {
    throw ArgumentError("li_inpaint: trace covers every view; nothing to interpolate from");
  }
  for (const auto a : full_rows) {
    // Nearest view (cyclic in angle) that still has measured samples.
    for (std::int64_t d = 1; d < A; ++d) {
      const std::int64_t cand[2] = {(a - d + A) % A, (a + d) % A};
      const auto* src = std::find_if(std::begin(cand), std::end(cand), [&](std::int64_t c) {
        return std::find(full_rows.begin(), full_rows.end(), c) == full_rows.end();
      });
      if (src == std::end(cand)) continue;
      std::copy_n(v.data() + *src * D, D, v.data() + a * D);
      break;
    }
  }
  out.fallback_rows = static_cast<int>(full_rows.size());
  return out;
}

PriorImage make_prior(const Tensor& uncorrected_hu, const Mask& metal, const PriorThresholds& thresholds) {
  if (uncorrected_hu.rank() != 2 || metal.rows() != uncorrected_hu.dim(0) || metal.cols() != uncorrected_hu.dim(1)) {
    throw DimensionError("make_prior: image/mask shape mismatch");
  }
  std::vector<float> p(uncorrected_hu.numel());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const float h = metal.flat(i) ? 0.0f : uncorrected_hu.data()[i];
    if (h < thresholds.air_hu) {
      p[i] = -1000.0f;
    } else if (h > thresholds.bone_hu) {
      p[i] = h;
    } else {
      p[i] = 0.0f;
    }
  }
  return {Tensor(uncorrected_hu.shape(), std::move(p)), thresholds};
}

ct::Sinogram nmar_with_prior(const ct::Sinogram& sino, const ct::Sinogram& prior_sino) {
  const Mask& trace = require_trace(sino, "nmar");
  if (prior_sino.data.shape() != sino.data.shape()) throw DimensionError("nmar: prior sinogram shape mismatch");

  std::vector<float> positive;
  for (float x : prior_sino.data.data()) {
    if (x > 0.0f) positive.push_back(x);
  }
  double eps = 1e-6;
  if (!positive.empty()) {
    auto mid = positive.begin() + static_cast<std::ptrdiff_t>(positive.size() / 2);
    std::nth_element(positive.begin(), mid, positive.end());
    eps = 1e-3 * *mid;
  }

  const auto n = sino.data.numel();
  std::vector<double> denom(n);
  ct::Sinogram normalized = sino;
  normalized.data = sino.data.clone();
  auto nv = normalized.data.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    denom[i] = std::max<double>(prior_sino.data.data()[i], eps);
    nv[i] = static_cast<float>(sino.data.data()[i] / denom[i]);
  }
  ct::Sinogram filled = li_inpaint(normalized);
  auto fv = filled.data.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    fv[i] = trace.flat(i) ? static_cast<float>(fv[i] * denom[i]) : sino.data.data()[i];
  }
  return filled;
}

ct::Sinogram nmar(const ct::Sinogram& sino, const Tensor& uncorrected_hu, const PriorThresholds& thresholds) {
  const auto metal = ct::segment_metal(uncorrected_hu).mask;
  const PriorImage prior = make_prior(uncorrected_hu, metal, thresholds);
  const ct::Sinogram prior_sino = ct::radon(ct::hu_to_mu(prior.grid, 1.0), sino.geometry);
  return nmar_with_prior(sino, prior_sino);
}

Method parse_method(std::string_view name) {
  if (name == "identity") return Method::identity;
  if (name == "li") return Method::li;
  if (name == "nmar") return Method::nmar;
  throw ArgumentError("unknown baseline method '" + std::string(name) + "'");
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::identity:
      return "identity";
    case Method::li:
      return "li";
    case Method::nmar:
      return "nmar";
  }
  return "?";
}

Tensor reconstruct_baseline(const Tensor& artifact_hu, Method method, int num_angles) {
  if (artifact_hu.rank() != 2 || artifact_hu.dim(0) != artifact_hu.dim(1)) {
    throw DimensionError("reconstruct_baseline: expected a square [N, N] image, got " + shape_str(artifact_hu.shape()));
  }
  if (method == Method::identity) return artifact_hu.clone();
  const auto geo = ct::Geometry::for_image(static_cast<int>(artifact_hu.dim(0)), num_angles);
  const auto seg = ct::segment_metal(artifact_hu);
  ct::Sinogram sino = ct::radon(ct::hu_to_mu(artifact_hu, 1.0), geo);
  sino.trace_mask = ct::project_trace(seg.mask, geo);
  const ct::Sinogram li = li_inpaint(sino);
  Tensor corrected = restamp(ct::mu_to_hu(ct::fbp(li), 1.0), artifact_hu, seg.mask);
  if (method == Method::nmar) {
    // The prior is segmented from the LI reconstruction, which is far less
    // streaked than the raw input.
    corrected = restamp(ct::mu_to_hu(ct::fbp(nmar(sino, corrected)), 1.0), artifact_hu, seg.mask);
  }
  return corrected;
}

}  // namespace adn::mar
