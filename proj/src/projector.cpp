#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "adn/ctsim.hpp"

namespace adn::ct {

namespace {

constexpr double kRayStep = 0.5;

// Walks the fixed sample grid of one ray, clipped to the bilinear support
// of an n x n image, and calls visit(flat_index, weight) for each of the
// (up to four) pixels a sample touches. Weights include the step length.
template <typename Visit>
void trace_ray(int n, double cos_t, double sin_t, double s, Visit&& visit) {
  const double c = (n - 1) / 2.0;
  const double x0 = c + s * cos_t, y0 = c + s * sin_t;
  const double dx = -sin_t, dy = cos_t;
  const double half = std::sqrt(2.0) * n / 2.0 + 2.0;
  double t0 = -half, t1 = half;
  auto clip = [&](double p0, double dp) {
    if (std::abs(dp) < 1e-12) {
      if (p0 <= -1.0 || p0 >= n) t1 = t0 - 1.0;
      return;
    }
    double a = (-1.0 - p0) / dp, b = (n - p0) / dp;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  };
  clip(x0, dx);
  clip(y0, dy);
  if (t1 <= t0) return;
  const auto k0 = static_cast<long>(std::ceil((t0 + half) / kRayStep));
  const auto k1 = static_cast<long>(std::floor((t1 + half) / kRayStep));
  for (long k = k0; k <= k1; ++k) {
    const double t = -half + k * kRayStep;
    const double x = x0 + t * dx, y = y0 + t * dy;
    const double fx = std::floor(x), fy = std::floor(y);
    const int j = static_cast<int>(fx), i = static_cast<int>(fy);
    const double wx = x - fx, wy = y - fy;
    const double w[4] = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
    const int ii[4] = {i, i, i + 1, i + 1};
    const int jj[4] = {j, j + 1, j, j + 1};
    for (int q = 0; q < 4; ++q) {
      if (ii[q] < 0 || ii[q] >= n || jj[q] < 0 || jj[q] >= n || w[q] == 0.0) continue;
      visit(static_cast<std::size_t>(ii[q]) * n + jj[q], w[q] * kRayStep);
    }
  }
}

void check_image(const Tensor& image, const Geometry& g) {
  if (image.rank() != 2 || image.dim(0) != image.dim(1)) {
    throw DimensionError("radon: image must be square [N, N], got " + shape_str(image.shape()));
  }
  if (image.dim(0) != g.image_size) {
    throw DimensionError("radon: image size " + std::to_string(image.dim(0)) + " does not match geometry " +
                         std::to_string(g.image_size));
  }
}

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Frequency response of the discrete Ram-Lak kernel on an n-point grid,
// optionally Hann-apodised.
std::vector<double> ramp_response(int n, double spacing, RampWindow window) {
  std::vector<double> h(static_cast<std::size_t>(n), 0.0);
  h[0] = 1.0 / (4.0 * spacing * spacing);
  for (int k = 1; k < n / 2; k += 2) {
    const double v = -1.0 / (std::numbers::pi * std::numbers::pi * k * k * spacing * spacing);
    h[static_cast<std::size_t>(k)] = v;
    h[static_cast<std::size_t>(n - k)] = v;
  }
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(n / 2 + 1));
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_plan p = fftw_plan_dft_r2c_1d(n, h.data(), reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
    fftw_execute(p);
    fftw_destroy_plan(p);
  }
  std::vector<double> resp(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    double r = spec[k].real();
    if (window == RampWindow::hann) r *= 0.5 * (1.0 + std::cos(std::numbers::pi * k / (n / 2.0)));
    resp[k] = r;
  }
  return resp;
}

}  // namespace

Geometry Geometry::for_image(int image_size, int num_angles) {
  Geometry g;
  g.image_size = image_size;
  g.num_angles = num_angles;
  int d = static_cast<int>(std::ceil(image_size * std::sqrt(2.0))) + 2;
  if (d % 2 == 0) ++d;
  g.num_detectors = d;
  g.detector_spacing = 1.0;
  return g;
}

double Geometry::angle(int k) const { return std::numbers::pi * k / num_angles; }

double Geometry::detector_offset(int j) const { return (j - (num_detectors - 1) / 2.0) * detector_spacing; }

void Geometry::validate() const {
  if (image_size < 1) throw ArgumentError("geometry: image_size must be >= 1");
  if (num_angles < 1) throw ArgumentError("geometry: num_angles must be >= 1");
  if (num_detectors < 1 || detector_spacing <= 0.0) throw ArgumentError("geometry: bad detector array");
  if ((num_detectors - 1) * detector_spacing < image_size * std::sqrt(2.0) - 1.0) {
    throw ArgumentError("geometry: detector array does not span the image diagonal");
  }
}

Sinogram radon(const Tensor& image, const Geometry& geometry) {
  geometry.validate();
  check_image(image, geometry);
  const int n = geometry.image_size;
  const auto img = image.data();
  Sinogram out{Tensor(Shape{geometry.num_angles, geometry.num_detectors}), geometry, std::nullopt, 0};
  auto s = out.data.mutable_data();
  for (int a = 0; a < geometry.num_angles; ++a) {
    const double th = geometry.angle(a), ct = std::cos(th), st = std::sin(th);
    for (int d = 0; d < geometry.num_detectors; ++d) {
      double acc = 0.0;
      trace_ray(n, ct, st, geometry.detector_offset(d), [&](std::size_t idx, double w) { acc += w * img[idx]; });
      s[static_cast<std::size_t>(a) * geometry.num_detectors + d] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor radon_adjoint(const Sinogram& sino) {
  const auto& g = sino.geometry;
  g.validate();
  const int n = g.image_size;
  std::vector<double> acc(static_cast<std::size_t>(n) * n, 0.0);
  const auto s = sino.data.data();
  for (int a = 0; a < g.num_angles; ++a) {
    const double th = g.angle(a), ct = std::cos(th), st = std::sin(th);
    for (int d = 0; d < g.num_detectors; ++d) {
      const double v = s[static_cast<std::size_t>(a) * g.num_detectors + d];
      if (v == 0.0) continue;
      trace_ray(n, ct, st, g.detector_offset(d), [&](std::size_t idx, double w) { acc[idx] += w * v; });
    }
  }
  return Tensor(Shape{n, n}, std::vector<float>(acc.begin(), acc.end()));
}

FbpResult fbp_checked(const Sinogram& sino, RampWindow window) {
  const auto& g = sino.geometry;
  g.validate();
  if (sino.data.shape() != Shape{g.num_angles, g.num_detectors}) {
    throw DimensionError("fbp: sinogram shape " + shape_str(sino.data.shape()) + " does not match geometry");
  }
  const int D = g.num_detectors, A = g.num_angles, n = g.image_size;
  int N = 1;
  while (N < 2 * D) N <<= 1;
  const auto resp = ramp_response(N, g.detector_spacing, window);

  std::vector<double> filtered(static_cast<std::size_t>(A) * D);
  std::vector<double> row(static_cast<std::size_t>(N));
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(N / 2 + 1));
  fftw_plan fwd, inv;
  {
    std::lock_guard lock(fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(N, row.data(), reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(N, reinterpret_cast<fftw_complex*>(spec.data()), row.data(), FFTW_ESTIMATE);
  }
  const auto s = sino.data.data();
  for (int a = 0; a < A; ++a) {
    std::fill(row.begin(), row.end(), 0.0);
    for (int d = 0; d < D; ++d) row[static_cast<std::size_t>(d)] = s[static_cast<std::size_t>(a) * D + d];
    fftw_execute(fwd);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= resp[k];
    fftw_execute(inv);
    for (int d = 0; d < D; ++d) {
      filtered[static_cast<std::size_t>(a) * D + d] = row[static_cast<std::size_t>(d)] * g.detector_spacing / N;
    }
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }

  const double c = (n - 1) / 2.0, mid = (D - 1) / 2.0;
  std::vector<double> img(static_cast<std::size_t>(n) * n, 0.0);
  for (int a = 0; a < A; ++a) {
    const double th = g.angle(a), ct = std::cos(th), st = std::sin(th);
    const double* q = filtered.data() + static_cast<std::size_t>(a) * D;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double u = ((j - c) * ct + (i - c) * st) / g.detector_spacing + mid;
        const double fu = std::floor(u);
        const int k = static_cast<int>(fu);
        const double w = u - fu;
        double v = 0.0;
        if (k >= 0 && k < D) v += (1.0 - w) * q[k];
        if (k + 1 >= 0 && k + 1 < D) v += w * q[k + 1];
        img[static_cast<std::size_t>(i) * n + j] += v;
      }
    }
  }
  const double f = std::numbers::pi / A;
  std::vector<float> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = static_cast<float>(img[i] * f);
  return {Tensor(Shape{n, n}, std::move(out)), A < 8};
}

Tensor fbp(const Sinogram& sino, RampWindow window) { return fbp_checked(sino, window).image; }

Mask project_trace(const Mask& mask, const Geometry& geometry) {
  if (mask.rows() != geometry.image_size || mask.cols() != geometry.image_size) {
    throw DimensionError("project_trace: mask does not match geometry image size");
  }
  Mask trace(geometry.num_angles, geometry.num_detectors);
  if (!mask.any()) return trace;
  const auto proj = radon(mask.to_tensor(), geometry);
  return Mask::from_tensor(proj.data, 1e-6f);
}

}  // namespace adn::ct
