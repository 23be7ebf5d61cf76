#include "shiftlab/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace shiftlab {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    throw std::invalid_argument("Tensor: data length does not match shape product");
  }
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_product(shape) != data_.size()) {
    throw std::invalid_argument("Tensor::reshaped: size mismatch");
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor zero_pad2d(const Tensor& t, std::size_t margin) {
  if (t.rank() != 4) throw std::invalid_argument("zero_pad2d: input must be 4-D");
  if (margin == 0) return t;
  const std::size_t B = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  Tensor out({B, C, H + 2 * margin, W + 2 * margin});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          out.at4(b, c, y + margin, x + margin) = t.at4(b, c, y, x);
  return out;
}

Tensor translate2d(const Tensor& t, Translation u) {
  if (t.rank() != 4) throw std::invalid_argument("translate2d: input must be 4-D");
  if (u.dy == 0 && u.dx == 0) return t;
  const std::size_t B = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  Tensor out(t.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y) {
        const long long sy = static_cast<long long>(y) - u.dy;
        if (sy < 0 || sy >= static_cast<long long>(H)) continue;
        for (std::size_t x = 0; x < W; ++x) {
          const long long sx = static_cast<long long>(x) - u.dx;
          if (sx < 0 || sx >= static_cast<long long>(W)) continue;
          out.at4(b, c, y, x) = t.at4(b, c, static_cast<std::size_t>(sy),
                                      static_cast<std::size_t>(sx));
        }
      }
  return out;
}

std::vector<double> translate1d(const std::vector<double>& s, int u) {
  const long long n = static_cast<long long>(s.size());
  std::vector<double> out(s.size(), 0.0);
  for (long long i = 0; i < n; ++i) {
    const long long j = i - u;
    if (j >= 0 && j < n) out[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace shiftlab
