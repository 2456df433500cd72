#include <cmath>
#include <numbers>
#include <random>

#include "adn/ctsim.hpp"

namespace adn::ct {

bool Ellipse::contains(double x, double y) const {
  const double c = std::cos(angle), s = std::sin(angle);
  const double dx = x - cx, dy = y - cy;
  const double u = (dx * c + dy * s) / ax;
  const double v = (-dx * s + dy * c) / ay;
  return u * u + v * v <= 1.0;
}

namespace {

Mask rasterize_mask(const Ellipse& e, int size) {
  Mask m(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      if (e.contains(j, i)) m.set(i, j);
    }
  }
  return m;
}

// Uniform point inside the ellipse scaled by `fraction`.
std::pair<double, double> point_inside(const Ellipse& body, double fraction, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = fraction * std::sqrt(u(rng));
  const double t = 2.0 * std::numbers::pi * u(rng);
  const double lx = r * body.ax * std::cos(t), ly = r * body.ay * std::sin(t);
  const double c = std::cos(body.angle), s = std::sin(body.angle);
  return {body.cx + lx * c - ly * s, body.cy + lx * s + ly * c};
}

}  // namespace

Tensor rasterize_hu(const std::vector<Ellipse>& ellipses, int size, bool include_metal) {
  Tensor grid(Shape{size, size}, static_cast<float>(kMinHu));
  auto g = grid.mutable_data();
  for (const auto& e : ellipses) {
    if (!include_metal && e.material == Material::metal) continue;
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        if (e.contains(j, i)) g[static_cast<std::size_t>(i * size + j)] = static_cast<float>(e.hu);
      }
    }
  }
  return grid;
}

Phantom generate_phantom(std::uint64_t seed, int size, const PhantomConfig& config) {
  if (size < 32) throw ArgumentError("generate_phantom: size must be >= 32, got " + std::to_string(size));
  if (config.min_structures < 0 || config.max_structures < config.min_structures || config.min_metal < 0 ||
      config.max_metal < config.min_metal || config.metal_min_pixels < 1 ||
      config.metal_max_pixels < config.metal_min_pixels) {
    throw ArgumentError("generate_phantom: inconsistent config ranges");
  }
  std::mt19937_64 rng(seed);
  auto uni = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  const double c = (size - 1) / 2.0;
  Phantom ph;
  Ellipse body;
  body.cx = c + uni(-0.03, 0.03) * size;
  body.cy = c + uni(-0.03, 0.03) * size;
  body.ax = uni(0.36, 0.44) * size;
  body.ay = uni(0.30, 0.40) * size;
  body.angle = uni(-0.3, 0.3);
  body.material = Material::water;
  body.hu = uni(0.0, 40.0);
  ph.ellipses.push_back(body);

  const int structures = pick(config.min_structures, config.max_structures);
  for (int k = 0; k < structures; ++k) {
    Ellipse e;
    auto [x, y] = point_inside(body, 0.6, rng);
    e.cx = x;
    e.cy = y;
    e.angle = uni(0.0, std::numbers::pi);
    if (uni(0.0, 1.0) < config.bone_probability) {
      e.ax = uni(0.03, 0.07) * size;
      e.ay = uni(0.03, 0.07) * size;
      e.material = Material::bone;
      e.hu = uni(200.0, 1000.0);
    } else {
      e.ax = uni(0.04, 0.15) * size;
      e.ay = uni(0.04, 0.15) * size;
      e.material = Material::water;
      e.hu = uni(-100.0, 80.0);
    }
    ph.ellipses.push_back(e);
  }

  ph.metal_mask = Mask(size, size);
  // Metal stays at least two pixels inside the body outline.
  Ellipse inner = body;
  inner.ax -= 2.0;
  inner.ay -= 2.0;
  if (config.max_metal > 0) {
    const int inserts = pick(config.min_metal, config.max_metal);
    for (int k = 0; k < inserts; ++k) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        Ellipse e;
        const double area = uni(static_cast<double>(config.metal_min_pixels), static_cast<double>(config.metal_max_pixels));
        const double aspect = uni(1.0, 2.5);
        e.ay = std::sqrt(area / (std::numbers::pi * aspect));
        e.ax = aspect * e.ay;
        auto [x, y] = point_inside(body, 0.6, rng);
        e.cx = x;
        e.cy = y;
        e.angle = uni(0.0, std::numbers::pi);
        e.material = Material::metal;
        e.hu = uni(2600.0, kMaxHu);
        const Mask m = rasterize_mask(e, size);
        const auto n = m.count();
        if (n < config.metal_min_pixels || n > config.metal_max_pixels) continue;
        bool rejected = false;
        for (std::size_t i = 0; i < m.size() && !rejected; ++i) {
          if (!m.flat(i)) continue;
          const auto r = static_cast<std::int64_t>(i) / size, c = static_cast<std::int64_t>(i) % size;
          rejected = ph.metal_mask.flat(i) || !inner.contains(static_cast<double>(c), static_cast<double>(r));
        }
        if (rejected) continue;
        ph.metal_mask = ph.metal_mask | m;
        ph.ellipses.push_back(e);
        break;
      }
    }
  }
  ph.grid = rasterize_hu(ph.ellipses, size, true);
  return ph;
}

Tensor smooth_phantom(std::uint64_t seed, int size) {
  std::mt19937_64 rng(seed);
  auto uni = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  struct Blob {
    double x, y, sigma, amp;
  };
  const double c = (size - 1) / 2.0;
  std::vector<Blob> blobs{{c, c, 0.22 * size, 1.0}};
  for (int k = 0; k < 6; ++k) {
    const double r = uni(0.0, 0.25) * size, t = uni(0.0, 2.0 * std::numbers::pi);
    blobs.push_back({c + r * std::cos(t), c + r * std::sin(t), uni(0.06, 0.12) * size, uni(-0.3, 0.5)});
  }
  Tensor img(Shape{size, size});
  auto d = img.mutable_data();
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      double v = 0.0;
      for (const auto& b : blobs) {
        const double r2 = (j - b.x) * (j - b.x) + (i - b.y) * (i - b.y);
        v += b.amp * std::exp(-r2 / (2.0 * b.sigma * b.sigma));
      }
      d[static_cast<std::size_t>(i * size + j)] = static_cast<float>(std::max(v, 0.0));
    }
  }
  return img;
}

}  // namespace adn::ct
