#pragma once

#include <vector>

#include "shiftlab/tensor.hpp"

namespace shiftlab::reference {

// Plain serial loop-nest versions of the forward/backward kernels. These are
// the oracle the parallel kernels are tested against and the baseline the
// benchmark compares them to; they must stay independent of the fast path.

Tensor conv2d(const Tensor& x, const Tensor& weights, const Tensor& bias, std::size_t stride,
              std::size_t padding);
Tensor maxpool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t padding);
Tensor avgpool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t padding);
Tensor blur_downsample2d(const Tensor& x, std::size_t stride);
Tensor global_avg_pool(const Tensor& x);
Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);

struct ConvGradients {
  Tensor d_input;
  Tensor d_weights;
  Tensor d_bias;
};

ConvGradients conv2d_backward(const Tensor& x, const Tensor& weights, const Tensor& d_out,
                              std::size_t stride, std::size_t padding);

struct DenseGradients {
  Tensor d_input;
  Tensor d_weights;
  Tensor d_bias;
};

DenseGradients dense_backward(const Tensor& x, const Tensor& weights, const Tensor& d_out);

}  // namespace shiftlab::reference
