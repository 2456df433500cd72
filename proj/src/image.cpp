#include "adn/image.hpp"

#include <algorithm>

namespace adn {

std::int64_t Mask::count() const {
  return static_cast<std::int64_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask Mask::operator|(const Mask& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionError("mask union: shape mismatch");
  Mask out(rows_, cols_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
  return out;
}

Tensor Mask::to_tensor() const {
  std::vector<float> v(bits_.begin(), bits_.end());
  return Tensor(Shape{rows_, cols_}, std::move(v));
}

Mask Mask::from_tensor(const Tensor& image, float threshold) {
  if (image.rank() != 2) throw DimensionError("mask needs a rank-2 image, got " + shape_str(image.shape()));
  Mask m(image.dim(0), image.dim(1));
  const auto d = image.data();
  for (std::size_t i = 0; i < d.size(); ++i) m.bits_[i] = d[i] > threshold ? 1 : 0;
  return m;
}

namespace {
Tensor map_values(const Tensor& t, auto fn) {
  std::vector<float> v(t.numel());
  const auto d = t.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(fn(static_cast<double>(d[i])));
  return Tensor(t.shape(), std::move(v));
}
}  // namespace

Tensor hu_to_unit(const Tensor& hu) {
  return map_values(hu, [](double h) {
    const double c = std::clamp(h, kWindowMinHu, kWindowMaxHu);
    return 2.0 * (c - kWindowMinHu) / (kWindowMaxHu - kWindowMinHu) - 1.0;
  });
}

Tensor unit_to_hu(const Tensor& unit) {
  return map_values(unit, [](double u) { return kWindowMinHu + (u + 1.0) * 0.5 * (kWindowMaxHu - kWindowMinHu); });
}

Tensor hu_to_metric(const Tensor& hu) {
  return map_values(hu, [](double h) {
    return (std::clamp(h, kWindowMinHu, kWindowMaxHu) - kWindowMinHu) / (kWindowMaxHu - kWindowMinHu);
  });
}

Tensor as_batch(const Tensor& image) {
  if (image.rank() != 2) throw DimensionError("as_batch: expected [H, W], got " + shape_str(image.shape()));
  return Tensor(Shape{1, 1, image.dim(0), image.dim(1)}, image.to_vector());
}

Tensor as_image(const Tensor& batch) {
  if (batch.rank() != 4 || batch.dim(0) != 1 || batch.dim(1) != 1) {
    throw DimensionError("as_image: expected [1, 1, H, W], got " + shape_str(batch.shape()));
  }
  return Tensor(Shape{batch.dim(2), batch.dim(3)}, batch.to_vector());
}

Tensor restamp(const Tensor& target, const Tensor& source, const Mask& mask) {
  if (target.shape() != source.shape() || target.numel() != mask.size()) {
    throw DimensionError("restamp: shape mismatch");
  }
  std::vector<float> v = target.to_vector();
  const auto s = source.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mask.flat(i)) v[i] = s[i];
  }
  return Tensor(target.shape(), std::move(v));
}

}  // namespace adn
