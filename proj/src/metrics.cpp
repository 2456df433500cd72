#include "adn/metrics.hpp"

#include <cmath>
#include <vector>

namespace adn {

namespace {

void check_pair(const Tensor& a, const Tensor& b, const std::optional<Mask>& mask, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected [H, W] images");
  if (mask && (mask->rows() != a.dim(0) || mask->cols() != a.dim(1))) {
    throw DimensionError(std::string(op) + ": mask shape does not match images");
  }
}

// "Valid" separable filtering of an H x W plane with a 1-D kernel.
std::vector<double> filter_valid(const std::vector<double>& src, std::int64_t h, std::int64_t w,
                                 const std::vector<double>& k) {
  const auto r = static_cast<std::int64_t>(k.size());
  const std::int64_t ho = h - r + 1, wo = w - r + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h * wo), 0.0);
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < wo; ++j) {
      double acc = 0.0;
      for (std::int64_t t = 0; t < r; ++t) acc += k[t] * src[i * w + j + t];
      tmp[i * wo + j] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ho * wo), 0.0);
  for (std::int64_t i = 0; i < ho; ++i) {
    for (std::int64_t j = 0; j < wo; ++j) {
      double acc = 0.0;
      for (std::int64_t t = 0; t < r; ++t) acc += k[t] * tmp[(i + t) * wo + j];
      out[i * wo + j] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, const std::optional<Mask>& mask, double data_range) {
  check_pair(a, b, mask, "psnr");
  double sse = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (mask && mask->flat(i)) continue;
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    sse += d * d;
    ++n;
  }
  if (n == 0) throw ArgumentError("psnr: every pixel is masked");
  const double mse = sse / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(data_range * data_range / mse));
}

double ssim(const Tensor& a, const Tensor& b, const std::optional<Mask>& mask, const SsimOptions& options) {
  check_pair(a, b, mask, "ssim");
  const std::int64_t h = a.dim(0), w = a.dim(1), r = options.window;
  if (r < 1 || h < r || w < r) throw ArgumentError("ssim: image smaller than the window");

  std::vector<double> k(static_cast<std::size_t>(r));
  double ks = 0.0;
  for (std::int64_t t = 0; t < r; ++t) {
    const double x = t - (r - 1) / 2.0;
    k[t] = std::exp(-x * x / (2.0 * options.sigma * options.sigma));
    ks += k[t];
  }
  for (auto& v : k) v /= ks;

  const auto n = static_cast<std::size_t>(h * w);
  std::vector<double> va(n), vb(n), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    va[i] = a.data()[i];
    vb[i] = b.data()[i];
    aa[i] = va[i] * va[i];
    bb[i] = vb[i] * vb[i];
    ab[i] = va[i] * vb[i];
  }
  const auto mu_a = filter_valid(va, h, w, k), mu_b = filter_valid(vb, h, w, k);
  const auto e_aa = filter_valid(aa, h, w, k), e_bb = filter_valid(bb, h, w, k), e_ab = filter_valid(ab, h, w, k);

  // Summed-area table of the mask to reject windows touching masked pixels.
  std::vector<std::int64_t> sat(static_cast<std::size_t>((h + 1) * (w + 1)), 0);
  if (mask) {
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) {
        sat[(i + 1) * (w + 1) + j + 1] = ((*mask)(i, j) ? 1 : 0) + sat[i * (w + 1) + j + 1] +
                                         sat[(i + 1) * (w + 1) + j] - sat[i * (w + 1) + j];
      }
    }
  }

  const double c1 = std::pow(options.k1 * options.data_range, 2);
  const double c2 = std::pow(options.k2 * options.data_range, 2);
  const std::int64_t ho = h - r + 1, wo = w - r + 1;
  double total = 0.0;
  std::size_t count = 0;
  for (std::int64_t i = 0; i < ho; ++i) {
    for (std::int64_t j = 0; j < wo; ++j) {
      if (mask) {
        const auto hits = sat[(i + r) * (w + 1) + j + r] - sat[i * (w + 1) + j + r] - sat[(i + r) * (w + 1) + j] +
                          sat[i * (w + 1) + j];
        if (hits > 0) continue;
      }
      const auto p = static_cast<std::size_t>(i * wo + j);
      const double ma = mu_a[p], mb = mu_b[p];
      const double sa = e_aa[p] - ma * ma, sb = e_bb[p] - mb * mb, sab = e_ab[p] - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * sab + c2)) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
      ++count;
    }
  }
  if (count == 0) throw ArgumentError("ssim: no window free of masked pixels");
  return total / static_cast<double>(count);
}

}  // namespace adn
