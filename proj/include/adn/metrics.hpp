#pragma once

#include <optional>

#include "adn/image.hpp"
#include "adn/tensor.hpp"

namespace adn {

/// Returned when the unmasked MSE is zero (or the PSNR would exceed it).
inline constexpr double kPsnrCapDb = 99.0;

/// 10 log10(range^2 / MSE) over pixels outside `mask`, capped at kPsnrCapDb.
/// Throws ArgumentError when every pixel is masked.
double psnr(const Tensor& a, const Tensor& b, const std::optional<Mask>& mask = std::nullopt,
            double data_range = 1.0);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

/// Gaussian-windowed SSIM averaged over every window that lies fully inside
/// the image and contains no masked pixel. Throws ArgumentError when no such
/// window exists.
double ssim(const Tensor& a, const Tensor& b, const std::optional<Mask>& mask = std::nullopt,
            const SsimOptions& options = {});

}  // namespace adn
