#pragma once

// 2-D image helpers shared by simulation, baselines and evaluation.
// Images are rank-2 tensors [H, W]; masks are dense boolean grids.

#include <cstdint>
#include <vector>

#include "adn/tensor.hpp"

namespace adn {

class Mask {
 public:
  Mask() = default;
  Mask(std::int64_t rows, std::int64_t cols) : rows_(rows), cols_(cols), bits_(static_cast<std::size_t>(rows * cols), 0) {}

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  bool operator()(std::int64_t r, std::int64_t c) const { return bits_[static_cast<std::size_t>(r * cols_ + c)] != 0; }
  void set(std::int64_t r, std::int64_t c, bool v = true) { bits_[static_cast<std::size_t>(r * cols_ + c)] = v ? 1 : 0; }
  bool flat(std::size_t i) const { return bits_[i] != 0; }
  void set_flat(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  std::int64_t count() const;
  bool any() const { return count() > 0; }
  Mask operator|(const Mask& other) const;
  bool operator==(const Mask& other) const = default;

  /// 0/1 float image of shape [rows, cols].
  Tensor to_tensor() const;
  /// Pixels strictly greater than `threshold`.
  static Mask from_tensor(const Tensor& image, float threshold = 0.5f);

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Display/training window: HU clamped to [-1000, 2000].
inline constexpr double kWindowMinHu = -1000.0;
inline constexpr double kWindowMaxHu = 2000.0;

/// HU -> [-1, 1] network intensity (clamped; metal saturates at +1).
Tensor hu_to_unit(const Tensor& hu);
/// [-1, 1] network intensity -> HU.
Tensor unit_to_hu(const Tensor& unit);
/// HU -> [0, 1] metric intensity (clamped to the same window).
Tensor hu_to_metric(const Tensor& hu);

/// [H, W] <-> [1, 1, H, W] views used at the network boundary.
Tensor as_batch(const Tensor& image);
Tensor as_image(const Tensor& batch);

/// Copies `source` into `target` wherever `mask` is set.
Tensor restamp(const Tensor& target, const Tensor& source, const Mask& mask);

}  // namespace adn
