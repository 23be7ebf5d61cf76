#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace shiftlab {

// Dense row-major array of doubles. 4-D tensors are ordered
// (batch, channel, height, width); 2-D tensors are (rows, columns).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at4(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
    return data_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double at4(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double& at2(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at2(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  // Reshape without copying; total size must match.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

// Integer pixel shift; positive dy moves content down, positive dx right.
struct Translation {
  int dy = 0;
  int dx = 0;
};

// Grows height and width by 2*margin, centering the original content.
// New cells are exactly zero. Rejects non-4-D input.
Tensor zero_pad2d(const Tensor& t, std::size_t margin);

// Shifts content by (dy, dx) on a fixed canvas; cells shifted in from
// outside are zero, content shifted out is dropped.
Tensor translate2d(const Tensor& t, Translation u);

// 1-D counterpart: same length, zero fill.
std::vector<double> translate1d(const std::vector<double>& s, int u);

}  // namespace shiftlab
