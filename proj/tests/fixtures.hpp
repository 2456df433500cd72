#pragma once

// Small builders shared by the unit tests and the acceptance binary.

#include <cmath>
#include <optional>

#include "adn/ctsim.hpp"
#include "adn/image.hpp"
#include "adn/metrics.hpp"

namespace fixtures {

/// Disk of density 1 centred on the rotation centre, each pixel weighted by
/// the fraction of its area inside the disk (8x8 subsamples).
inline adn::Tensor disk(int n, double radius) {
  const double c = (n - 1) / 2.0;
  constexpr int kSub = 8;
  adn::Tensor img(adn::Shape{n, n});
  auto d = img.mutable_data();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      int inside = 0;
      for (int a = 0; a < kSub; ++a) {
        for (int b = 0; b < kSub; ++b) {
          const double x = j - 0.5 + (a + 0.5) / kSub - c, y = i - 0.5 + (b + 0.5) / kSub - c;
          inside += x * x + y * y <= radius * radius;
        }
      }
      d[static_cast<std::size_t>(i * n + j)] = static_cast<float>(inside) / (kSub * kSub);
    }
  }
  return img;
}

/// Uniform water disk (0 HU) as a phantom with no metal.
inline adn::ct::Phantom water_disk(int n, double radius) {
  adn::ct::Phantom ph;
  adn::ct::Ellipse e;
  e.cx = e.cy = (n - 1) / 2.0;
  e.ax = e.ay = radius;
  e.material = adn::ct::Material::water;
  e.hu = 0.0;
  ph.ellipses.push_back(e);
  ph.grid = adn::ct::rasterize_hu(ph.ellipses, n, true);
  ph.metal_mask = adn::Mask(n, n);
  return ph;
}

/// Mean HU inside the annulus r0 <= r < r1 around the image centre.
inline double ring_mean(const adn::Tensor& hu, double r0, double r1) {
  const auto n = hu.dim(0);
  const double c = (n - 1) / 2.0;
  double acc = 0.0;
  int count = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      const double r = std::hypot(i - c, j - c);
      if (r < r0 || r >= r1) continue;
      acc += hu.data()[static_cast<std::size_t>(i * n + j)];
      ++count;
    }
  }
  return acc / count;
}

/// PSNR on the [0, 1] metric window, metal excluded.
inline double masked_psnr(const adn::Tensor& a_hu, const adn::Tensor& b_hu, const adn::Mask& metal) {
  return adn::psnr(adn::hu_to_metric(a_hu), adn::hu_to_metric(b_hu), metal);
}

}  // namespace fixtures
