#pragma once

// Procedural CT phantoms, a parallel-beam projector/back-projector,
// filtered back-projection and polychromatic metal-artifact synthesis.
//
// Coordinates: column index is x, row index is y, and the rotation centre
// sits at ((W-1)/2, (H-1)/2). Attenuation values are per pixel, so a line
// integral over an image of ones across the full width equals W.

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "adn/image.hpp"
#include "adn/tensor.hpp"

namespace adn::ct {

enum class Material : std::uint8_t { water = 0, bone = 1, metal = 2 };
inline constexpr std::size_t kMaterialCount = 3;

inline constexpr double kMetalThresholdHu = 2500.0;
inline constexpr double kMinHu = -1000.0;
inline constexpr double kMaxHu = 4000.0;

struct Ellipse {
  double cx = 0, cy = 0;  // pixels
  double ax = 1, ay = 1;  // semi-axes, pixels
  double angle = 0;       // radians
  Material material = Material::water;
  double hu = 0;

  bool contains(double x, double y) const;
};

struct PhantomConfig {
  int min_structures = 2;
  int max_structures = 6;
  double bone_probability = 0.4;
  // Metal inserts, non-overlapping and inside the body; max_metal = 0
  // disables metal entirely.
  int min_metal = 1;
  int max_metal = 3;
  std::int64_t metal_min_pixels = 30;
  std::int64_t metal_max_pixels = 400;
};

struct Phantom {
  Tensor grid;  // [H, W] HU
  Mask metal_mask;
  std::vector<Ellipse> ellipses;  // paint order: body, structures, metal

  std::int64_t size() const { return grid.dim(0); }
};

/// Deterministic in (seed, size, config). Requires size >= 32.
Phantom generate_phantom(std::uint64_t seed, int size, const PhantomConfig& config);

/// Rasterises the ellipse list as HU, optionally skipping metal ellipses.
Tensor rasterize_hu(const std::vector<Ellipse>& ellipses, int size, bool include_metal);

/// Smooth, metal-free sum of Gaussian blobs inside the inscribed disk;
/// values are relative attenuation (water ~ 1). Used for round-trip checks.
Tensor smooth_phantom(std::uint64_t seed, int size);

struct Geometry {
  int image_size = 128;
  int num_angles = 180;
  int num_detectors = 185;
  double detector_spacing = 1.0;  // pixels

  /// Default geometry for a square image: odd detector count spanning the
  /// diagonal with a one-pixel margin on each side.
  static Geometry for_image(int image_size, int num_angles = 180);

  double angle(int k) const;
  double detector_offset(int j) const;
  /// Throws ArgumentError unless the geometry is usable.
  void validate() const;
};

struct Sinogram {
  Tensor data;  // [num_angles, num_detectors]
  Geometry geometry;
  std::optional<Mask> trace_mask;
  // Rows where a trace covered the whole row and nearest-value fill was used.
  int fallback_rows = 0;
};

/// Fixed-step (0.5 px) ray-driven line integrals with bilinear sampling.
Sinogram radon(const Tensor& image, const Geometry& geometry);

/// Exact transpose of radon(): scatters each ray sample back with the same
/// bilinear weights. Only used by adjoint checks.
Tensor radon_adjoint(const Sinogram& sino);

enum class RampWindow { ram_lak, hann };

struct FbpResult {
  Tensor image;
  // Set when fewer than 8 views were available.
  bool degraded = false;
};

/// Ramp-filtered (frequency domain) pixel-driven back-projection.
FbpResult fbp_checked(const Sinogram& sino, RampWindow window = RampWindow::ram_lak);
Tensor fbp(const Sinogram& sino, RampWindow window = RampWindow::ram_lak);

struct EnergyBin {
  double kev = 0;
  double weight = 0;
  std::array<double, kMaterialCount> mu{};  // per pixel, reference density
};

struct Spectrum {
  std::vector<EnergyBin> bins;

  /// Five bins spanning 40-120 keV with tabulated water/bone/titanium
  /// attenuation, scaled to the given pixel size.
  static Spectrum standard(double pixel_size_cm);
  /// Two bins (50/100 keV, equal weight); used for beam-hardening checks.
  static Spectrum two_bin(double pixel_size_cm);
  /// Single bin at the effective attenuation of standard(); no hardening.
  static Spectrum monochromatic(double pixel_size_cm);

  /// Spectrum-weighted attenuation; equals mu at the mean energy for a
  /// two-bin spectrum.
  double effective_mu(Material m) const;
  void validate() const;
};

/// Per-material relative-density maps. Water/bone density follows the HU
/// of the painted ellipse against the spectrum's effective attenuation;
/// metal is at reference density.
std::array<Tensor, kMaterialCount> material_densities(const Phantom& phantom, const Spectrum& spectrum,
                                                      bool include_metal);

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

/// Beam-hardened, Poisson-sampled log measurements. photons = kNoiseless
/// disables sampling.
Sinogram polychromatic_project(const Phantom& phantom, const Geometry& geometry, const Spectrum& spectrum,
                               double photons, std::uint64_t seed, bool include_metal = true);

/// Attenuation image (per pixel) <-> HU against a water reference.
Tensor mu_to_hu(const Tensor& mu, double mu_water);
Tensor hu_to_mu(const Tensor& hu, double mu_water);

struct SynthesisConfig {
  int size = 128;
  int num_angles = 180;
  double fov_cm = 25.6;
  double photons = 1e6;
  PhantomConfig phantom;

  double pixel_size_cm() const { return fov_cm / size; }
};

struct PairedSample {
  std::string id;
  Tensor artifact;  // x^a, HU
  Tensor clean;     // x, HU
  Mask metal_mask;
};

PairedSample synthesize_pair(std::uint64_t seed, const SynthesisConfig& config);

struct MetalSegmentation {
  Mask mask;
  std::int64_t largest_component = 0;  // 4-connectivity
};

MetalSegmentation segment_metal(const Tensor& image_hu, double threshold_hu = kMetalThresholdHu);

/// Sinogram entries whose ray crosses the mask (radon of the 0/1 mask > 1e-6).
Mask project_trace(const Mask& mask, const Geometry& geometry);

}  // namespace adn::ct
