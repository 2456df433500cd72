#include <cmath>
#include <deque>
#include <numeric>
#include <random>

#include "adn/ctsim.hpp"
#include "adn/rng.hpp"

namespace adn::ct {

namespace {

// Linear attenuation in 1/cm: water, cortical bone (1.92 g/cm3),
// titanium (4.5 g/cm3).
struct TableRow {
  double kev, weight, water, bone, metal;
};

constexpr TableRow kStandardTable[] = {
    {40.0, 0.15, 0.268, 1.277, 9.98},
    {60.0, 0.30, 0.206, 0.605, 3.56},
    {80.0, 0.28, 0.184, 0.428, 1.905},
    {100.0, 0.17, 0.171, 0.357, 1.225},
    {120.0, 0.10, 0.163, 0.319, 0.95},
};

constexpr TableRow kTwoBinTable[] = {
    {50.0, 0.5, 0.227, 0.814, 5.46},
    {100.0, 0.5, 0.171, 0.357, 1.225},
};

template <std::size_t N>
Spectrum from_table(const TableRow (&rows)[N], double pixel_size_cm) {
  if (!(pixel_size_cm > 0.0)) throw ArgumentError("spectrum: pixel size must be positive");
  Spectrum s;
  for (const auto& r : rows) {
    s.bins.push_back({r.kev, r.weight, {r.water * pixel_size_cm, r.bone * pixel_size_cm, r.metal * pixel_size_cm}});
  }
  return s;
}

std::size_t idx(Material m) { return static_cast<std::size_t>(m); }

}  // namespace

Spectrum Spectrum::standard(double pixel_size_cm) { return from_table(kStandardTable, pixel_size_cm); }

Spectrum Spectrum::two_bin(double pixel_size_cm) { return from_table(kTwoBinTable, pixel_size_cm); }

Spectrum Spectrum::monochromatic(double pixel_size_cm) {
  const Spectrum poly = standard(pixel_size_cm);
  EnergyBin bin;
  bin.weight = 1.0;
  for (const auto& b : poly.bins) bin.kev += b.weight * b.kev;
  for (std::size_t m = 0; m < kMaterialCount; ++m) bin.mu[m] = poly.effective_mu(static_cast<Material>(m));
  return Spectrum{{bin}};
}

double Spectrum::effective_mu(Material m) const {
  double acc = 0.0;
  for (const auto& b : bins) acc += b.weight * b.mu[idx(m)];
  return acc;
}

void Spectrum::validate() const {
  if (bins.empty()) throw ArgumentError("spectrum: no energy bins");
  double total = 0.0;
  for (const auto& b : bins) {
    if (!(b.weight > 0.0)) throw ArgumentError("spectrum: bin weights must be positive");
    total += b.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("spectrum: bin weights must sum to 1");
  for (std::size_t k = 1; k < bins.size(); ++k) {
    if (bins[k].kev <= bins[k - 1].kev) throw ArgumentError("spectrum: bins must be sorted by energy");
    for (std::size_t m = 0; m < kMaterialCount; ++m) {
      if (bins[k].mu[m] > bins[k - 1].mu[m]) throw ArgumentError("spectrum: attenuation must not increase with energy");
    }
  }
}

std::array<Tensor, kMaterialCount> material_densities(const Phantom& phantom, const Spectrum& spectrum,
                                                      bool include_metal) {
  const auto n = phantom.size();
  std::array<Tensor, kMaterialCount> maps;
  for (auto& m : maps) m = Tensor(Shape{n, n});
  const double mu_w = spectrum.effective_mu(Material::water);
  for (const auto& e : phantom.ellipses) {
    if (!include_metal && e.material == Material::metal) continue;
    const double density =
        e.material == Material::metal ? 1.0 : mu_w * (1.0 + e.hu / 1000.0) / spectrum.effective_mu(e.material);
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        if (!e.contains(static_cast<double>(j), static_cast<double>(i))) continue;
        const auto p = static_cast<std::size_t>(i * n + j);
        for (auto& m : maps) m.mutable_data()[p] = 0.0f;
        maps[idx(e.material)].mutable_data()[p] = static_cast<float>(density);
      }
    }
  }
  return maps;
}

Sinogram polychromatic_project(const Phantom& phantom, const Geometry& geometry, const Spectrum& spectrum,
                               double photons, std::uint64_t seed, bool include_metal) {
  spectrum.validate();
  if (!(photons > 0.0)) throw ArgumentError("polychromatic_project: photons must be positive");
  const auto densities = material_densities(phantom, spectrum, include_metal);
  std::array<Sinogram, kMaterialCount> paths;
  for (std::size_t m = 0; m < kMaterialCount; ++m) paths[m] = radon(densities[m], geometry);

  Sinogram out = paths[0];
  auto meas = out.data.mutable_data();
  const bool noisy = std::isfinite(photons);
  std::mt19937_64 rng(seed);
  for (std::size_t r = 0; r < meas.size(); ++r) {
    double intensity = 0.0;
    for (const auto& b : spectrum.bins) {
      double line = 0.0;
      for (std::size_t m = 0; m < kMaterialCount; ++m) line += b.mu[m] * paths[m].data.data()[r];
      intensity += b.weight * std::exp(-line);
    }
    double value;
    if (noisy) {
      std::poisson_distribution<long long> poisson(photons * intensity);
      const auto count = std::max<long long>(poisson(rng), 1);
      value = -std::log(static_cast<double>(count) / photons);
    } else {
      value = -std::log(intensity);
    }
    meas[r] = static_cast<float>(value);
  }
  return out;
}

Tensor mu_to_hu(const Tensor& mu, double mu_water) {
  std::vector<float> v(mu.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(1000.0 * (mu.data()[i] / mu_water - 1.0));
  return Tensor(mu.shape(), std::move(v));
}

Tensor hu_to_mu(const Tensor& hu, double mu_water) {
  std::vector<float> v(hu.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(mu_water * (1.0 + hu.data()[i] / 1000.0));
  return Tensor(hu.shape(), std::move(v));
}

PairedSample synthesize_pair(std::uint64_t seed, const SynthesisConfig& config) {
  const Phantom ph = generate_phantom(mix_seed(seed, 0), config.size, config.phantom);
  const Geometry geo = Geometry::for_image(config.size, config.num_angles);
  const Spectrum spec = Spectrum::standard(config.pixel_size_cm());
  const double mu_w = spec.effective_mu(Material::water);

  PairedSample s;
  s.id = "s" + std::to_string(seed);
  s.metal_mask = ph.metal_mask;

  const Tensor tissue_mu = hu_to_mu(rasterize_hu(ph.ellipses, config.size, false), mu_w);
  s.clean = mu_to_hu(fbp(radon(tissue_mu, geo)), mu_w);

  const Sinogram measured = polychromatic_project(ph, geo, spec, config.photons, mix_seed(seed, 1), true);
  s.artifact = restamp(mu_to_hu(fbp(measured), mu_w), ph.grid, ph.metal_mask);
  return s;
}

MetalSegmentation segment_metal(const Tensor& image_hu, double threshold_hu) {
  if (image_hu.rank() != 2) throw DimensionError("segment_metal: expected [H, W], got " + shape_str(image_hu.shape()));
  MetalSegmentation seg;
  seg.mask = Mask::from_tensor(image_hu, static_cast<float>(threshold_hu));
  const auto rows = seg.mask.rows(), cols = seg.mask.cols();
  std::vector<std::uint8_t> seen(seg.mask.size(), 0);
  std::deque<std::int64_t> queue;
  for (std::int64_t start = 0; start < rows * cols; ++start) {
    if (!seg.mask.flat(static_cast<std::size_t>(start)) || seen[static_cast<std::size_t>(start)]) continue;
    std::int64_t size = 0;
    seen[static_cast<std::size_t>(start)] = 1;
    queue.push_back(start);
    while (!queue.empty()) {
      const auto p = queue.front();
      queue.pop_front();
      ++size;
      const auto r = p / cols, c = p % cols;
      const std::int64_t nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& q : nbr) {
        if (q[0] < 0 || q[0] >= rows || q[1] < 0 || q[1] >= cols) continue;
        const auto f = static_cast<std::size_t>(q[0] * cols + q[1]);
        if (seg.mask.flat(f) && !seen[f]) {
          seen[f] = 1;
          queue.push_back(static_cast<std::int64_t>(f));
        }
      }
    }
    seg.largest_component = std::max(seg.largest_component, size);
  }
  return seg;
}

}  // namespace adn::ct
