#pragma once

// Classical projection-completion metal artifact reduction: per-view
// linear interpolation across the metal trace (LI) and its prior-normalised
// variant (NMAR).

#include <string_view>

#include "adn/ctsim.hpp"

namespace adn::mar {

/// Replaces every maximal traced run in each view by linear interpolation
/// between its untraced neighbours (nearest value when only one side
/// exists). Views traced end to end copy the nearest inpainted view and are
/// counted in fallback_rows. Untraced entries are never modified.
ct::Sinogram li_inpaint(const ct::Sinogram& sino);

struct PriorThresholds {
  double air_hu = -300.0;
  double bone_hu = 150.0;
};

struct PriorImage {
  Tensor grid;  // HU: air -1000, soft tissue 0, bone keeps its value
  PriorThresholds thresholds;
};

/// Three-class prior from an uncorrected image. Pixels in `metal` become
/// soft tissue before classification.
PriorImage make_prior(const Tensor& uncorrected_hu, const Mask& metal, const PriorThresholds& thresholds = {});

/// Normalise by the prior sinogram, interpolate, denormalise. Untraced
/// entries are restored from the input.
ct::Sinogram nmar_with_prior(const ct::Sinogram& sino, const ct::Sinogram& prior_sino);

/// Full NMAR: prior from `uncorrected_hu` (metal segmented at 2500 HU),
/// projected in relative attenuation units (water = 1).
ct::Sinogram nmar(const ct::Sinogram& sino, const Tensor& uncorrected_hu, const PriorThresholds& thresholds = {});

enum class Method { identity, li, nmar };

Method parse_method(std::string_view name);
std::string_view method_name(Method m);

/// End-to-end correction of an artifact-affected HU image: segment metal,
/// forward project the image, complete the trace, reconstruct, and re-stamp
/// the metal region from the input.
Tensor reconstruct_baseline(const Tensor& artifact_hu, Method method, int num_angles = 180);

}  // namespace adn::mar
