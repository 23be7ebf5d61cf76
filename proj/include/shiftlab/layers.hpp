#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "shiftlab/tensor.hpp"

namespace shiftlab {

enum class LayerKind { Conv2D, MaxPool2D, AvgPool2D, BlurPool2D, GlobalAvgPool, Dense, ReLU };

std::string layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::size_t kernel = 1;        // filter kinds
  std::size_t stride = 1;        // filter kinds
  std::size_t out_channels = 0;  // Conv2D / Dense
  std::size_t padding = 0;       // filter kinds
};

LayerSpec conv_layer(std::size_t out_channels, std::size_t kernel, std::size_t stride);
LayerSpec maxpool_layer(std::size_t kernel, std::size_t stride);
LayerSpec avgpool_layer(std::size_t kernel, std::size_t stride);
LayerSpec blurpool_layer(std::size_t stride);
LayerSpec gap_layer();
LayerSpec dense_layer(std::size_t out_features);
LayerSpec relu_layer();

// Shape of the value flowing between layers: spatial maps carry
// (channels, height, width); flat vectors carry (features, 1, 1).
struct StageShape {
  std::size_t channels = 0, height = 0, width = 0;
  bool flat = false;
  std::size_t features() const { return channels * height * width; }
  bool operator==(const StageShape&) const = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::size_t in_channels = 1, in_height = 0, in_width = 0;
  std::size_t class_count = 10;

  // Shapes before layer 0, between layers, and after the last layer
  // (layers.size() + 1 entries). Throws naming the failing layer.
  std::vector<StageShape> shape_chain() const;
  void validate() const;  // shape chain + final length == class_count
};

//   floor((w_prev - k_w + 2p) / s) + 1 ; rejects a negative numerator.
std::size_t output_width(std::size_t w_prev, std::size_t k_w, std::size_t p, std::size_t s);

//   floor((k_w - 1) / 2) — keeps stride-1 filtering shape-preserving for odd
//   kernels and compensates kernel-extent downsampling only, not stride.
std::size_t default_padding(std::size_t k_w);

// Sum over conv layers of in_channels * kernel^2 * out_channels * out_width^2.
std::uint64_t complexity_estimate(const NetworkSpec& spec);

// Fixed separable anti-aliasing kernel: outer product of [1,4,6,4,1]/16.
const std::array<double, 5>& binomial5();

// ---- forward kernels (OpenMP-parallel; serial twins live in reference.hpp) ----

// x: (B, C_in, H, W); weights: (C_out, C_in, k, k); bias: (C_out).
// Zero padding, identical stride on both axes, cross-correlation.
Tensor conv2d(const Tensor& x, const Tensor& weights, const Tensor& bias, std::size_t stride,
              std::size_t padding);

// Padding cells participate as value 0 in the window maximum.
Tensor maxpool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t padding);

// Window mean with divisor k^2; padding cells count as 0.
Tensor avgpool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t padding);

// Depthwise 5x5 binomial blur, padding 2, then stride s. Non-learned.
Tensor blur_downsample2d(const Tensor& x, std::size_t stride);

// Per-channel spatial mean; output (B, C).
Tensor global_avg_pool(const Tensor& x);

// x: (B, F); weights: (F, O); bias: (O). Affine map x*W + b.
Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);

Tensor relu(const Tensor& x);

struct SoftmaxLoss {
  double loss = 0.0;
  Tensor probabilities;  // (B, C), rows sum to 1
};

// Max-subtracted softmax; loss is the mean negative log-probability of the
// true class. Rejects labels outside [0, class_count).
SoftmaxLoss softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace shiftlab
