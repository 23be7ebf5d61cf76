#include "shiftlab/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace shiftlab {

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::AvgPool2D: return "AvgPool2D";
    case LayerKind::BlurPool2D: return "BlurPool2D";
    case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
    case LayerKind::Dense: return "Dense";
    case LayerKind::ReLU: return "ReLU";
  }
  return "?";
}

LayerSpec conv_layer(std::size_t out_channels, std::size_t kernel, std::size_t stride) {
  return LayerSpec{LayerKind::Conv2D, kernel, stride, out_channels, default_padding(kernel)};
}
LayerSpec maxpool_layer(std::size_t kernel, std::size_t stride) {
  return LayerSpec{LayerKind::MaxPool2D, kernel, stride, 0, default_padding(kernel)};
}
LayerSpec avgpool_layer(std::size_t kernel, std::size_t stride) {
  return LayerSpec{LayerKind::AvgPool2D, kernel, stride, 0, default_padding(kernel)};
}
LayerSpec blurpool_layer(std::size_t stride) {
  return LayerSpec{LayerKind::BlurPool2D, 5, stride, 0, 2};
}
LayerSpec gap_layer() { return LayerSpec{LayerKind::GlobalAvgPool, 1, 1, 0, 0}; }
LayerSpec dense_layer(std::size_t out_features) {
  return LayerSpec{LayerKind::Dense, 1, 1, out_features, 0};
}
LayerSpec relu_layer() { return LayerSpec{LayerKind::ReLU, 1, 1, 0, 0}; }

std::size_t output_width(std::size_t w_prev, std::size_t k_w, std::size_t p, std::size_t s) {
  if (s < 1) throw std::invalid_argument("output_width: stride must be >= 1");
  if (k_w < 1) throw std::invalid_argument("output_width: kernel must be >= 1");
  if (w_prev + 2 * p < k_w)
    throw std::invalid_argument("output_width: kernel larger than padded input");
  return (w_prev + 2 * p - k_w) / s + 1;
}

std::size_t default_padding(std::size_t k_w) {
  if (k_w < 1) throw std::invalid_argument("default_padding: kernel must be >= 1");
  return (k_w - 1) / 2;
}

std::vector<StageShape> NetworkSpec::shape_chain() const {
  std::vector<StageShape> chain;
  chain.reserve(layers.size() + 1);
  StageShape cur{in_channels, in_height, in_width, false};
  chain.push_back(cur);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where =
        "layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) + ")";
    try {
      switch (l.kind) {
        case LayerKind::Conv2D:
          if (cur.flat) throw std::invalid_argument("conv on flat input");
          cur.channels = l.out_channels;
          cur.height = output_width(cur.height, l.kernel, l.padding, l.stride);
          cur.width = output_width(cur.width, l.kernel, l.padding, l.stride);
          break;
        case LayerKind::MaxPool2D:
        case LayerKind::AvgPool2D:
        case LayerKind::BlurPool2D:
          if (cur.flat) throw std::invalid_argument("pool on flat input");
          cur.height = output_width(cur.height, l.kernel, l.padding, l.stride);
          cur.width = output_width(cur.width, l.kernel, l.padding, l.stride);
          break;
        case LayerKind::GlobalAvgPool:
          if (cur.flat) throw std::invalid_argument("global pool on flat input");
          cur = StageShape{cur.channels, 1, 1, true};
          break;
        case LayerKind::Dense:
          cur = StageShape{l.out_channels, 1, 1, true};
          break;
        case LayerKind::ReLU:
          break;
      }
    } catch (const std::exception& e) {
      throw std::invalid_argument("NetworkSpec: " + where + ": " + e.what());
    }
    chain.push_back(cur);
  }
  return chain;
}

void NetworkSpec::validate() const {
  const std::vector<StageShape> chain = shape_chain();
  if (chain.back().features() != class_count) {
    throw std::invalid_argument(
        "NetworkSpec: final output length " + std::to_string(chain.back().features()) +
        " does not equal class count " + std::to_string(class_count));
  }
}

std::uint64_t complexity_estimate(const NetworkSpec& spec) {
  const std::vector<StageShape> chain = spec.shape_chain();
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind != LayerKind::Conv2D) continue;
    const std::uint64_t n_prev = chain[i].channels;
    const std::uint64_t k = l.kernel;
    const std::uint64_t n_out = l.out_channels;
    const std::uint64_t m = chain[i + 1].width;
    total += n_prev * k * k * n_out * m * m;
  }
  return total;
}

const std::array<double, 5>& binomial5() {
  static const std::array<double, 5> taps = {1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0,
                                             1.0 / 16.0};
  return taps;
}

Tensor conv2d(const Tensor& x, const Tensor& weights, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  if (x.rank() != 4) throw std::invalid_argument("conv2d: input must be 4-D");
  if (weights.rank() != 4) throw std::invalid_argument("conv2d: weights must be 4-D");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (weights.dim(2) != weights.dim(3))
    throw std::invalid_argument("conv2d: kernel must be square");
  if (weights.dim(1) != x.dim(1))
    throw std::invalid_argument("conv2d: weight input channels do not match input");
  if (bias.rank() != 1 || bias.dim(0) != weights.dim(0))
    throw std::invalid_argument("conv2d: bias length must equal output channels");

  const std::int64_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t Cout = weights.dim(0), K = weights.dim(2);
  const std::int64_t P = static_cast<std::int64_t>(padding);
  const std::int64_t S = static_cast<std::int64_t>(stride);
  const std::int64_t Ho = output_width(H, K, padding, stride);
  const std::int64_t Wo = output_width(W, K, padding, stride);

  Tensor out({static_cast<std::size_t>(B), static_cast<std::size_t>(Cout),
              static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)});
  const double* xd = x.data();
  const double* wd = weights.data();
  const double* bd = bias.data();
  double* od = out.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t oc = 0; oc < Cout; ++oc) {
      for (std::int64_t oy = 0; oy < Ho; ++oy) {
        double* orow = od + ((b * Cout + oc) * Ho + oy) * Wo;
        for (std::int64_t ox = 0; ox < Wo; ++ox) orow[ox] = bd[oc];
        for (std::int64_t ic = 0; ic < Cin; ++ic) {
          for (std::int64_t ky = 0; ky < K; ++ky) {
            const std::int64_t iy = oy * S + ky - P;
            if (iy < 0 || iy >= H) continue;
            const double* irow = xd + ((b * Cin + ic) * H + iy) * W;
            const double* wrow = wd + ((oc * Cin + ic) * K + ky) * K;
            for (std::int64_t kx = 0; kx < K; ++kx) {
              const double wv = wrow[kx];
              // valid ox range keeps ix = ox*S + kx - P inside [0, W)
              std::int64_t lo = 0;
              if (kx < P) lo = (P - kx + S - 1) / S;
              std::int64_t hi = Wo - 1;
              const std::int64_t ix_max = W - 1 + P - kx;
              if (ix_max < hi * S) hi = ix_max / S;
              if (S == 1) {
                const std::int64_t shift = kx - P;
                for (std::int64_t ox = lo; ox <= hi; ++ox) {
                  orow[ox] += wv * irow[ox + shift];
                }
              } else {
                for (std::int64_t ox = lo; ox <= hi; ++ox) {
                  orow[ox] += wv * irow[ox * S + kx - P];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

namespace {

enum class PoolOp { Max, Avg };

Tensor pool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t padding,
              PoolOp op, const char* name) {
  if (x.rank() != 4) throw std::invalid_argument(std::string(name) + ": input must be 4-D");
  if (k < 1) throw std::invalid_argument(std::string(name) + ": window must be >= 1");
  if (stride < 1) throw std::invalid_argument(std::string(name) + ": stride must be >= 1");
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (k > x.dim(2) + 2 * padding || k > x.dim(3) + 2 * padding)
    throw std::invalid_argument(std::string(name) + ": window larger than padded input");
  const std::int64_t P = static_cast<std::int64_t>(padding);
  const std::int64_t S = static_cast<std::int64_t>(stride);
  const std::int64_t K = static_cast<std::int64_t>(k);
  const std::int64_t Ho = output_width(H, k, padding, stride);
  const std::int64_t Wo = output_width(W, k, padding, stride);

  Tensor out({static_cast<std::size_t>(B), static_cast<std::size_t>(C),
              static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)});
  const double* xd = x.data();
  double* od = out.data();
  const double inv_area = 1.0 / (static_cast<double>(k) * static_cast<double>(k));

#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const double* plane = xd + (b * C + c) * H * W;
      double* oplane = od + (b * C + c) * Ho * Wo;
      for (std::int64_t oy = 0; oy < Ho; ++oy) {
        for (std::int64_t ox = 0; ox < Wo; ++ox) {
          double acc = (op == PoolOp::Max) ? -std::numeric_limits<double>::infinity() : 0.0;
          for (std::int64_t ky = 0; ky < K; ++ky) {
            const std::int64_t iy = oy * S + ky - P;
            for (std::int64_t kx = 0; kx < K; ++kx) {
              const std::int64_t ix = ox * S + kx - P;
              const bool inside = iy >= 0 && iy < H && ix >= 0 && ix < W;
              const double v = inside ? plane[iy * W + ix] : 0.0;
              if (op == PoolOp::Max) {
                if (v > acc) acc = v;
              } else {
                acc += v;
              }
            }
          }
          oplane[oy * Wo + ox] = (op == PoolOp::Max) ? acc : acc * inv_area;
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor maxpool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t padding) {
  return pool2d(x, k, stride, padding, PoolOp::Max, "maxpool2d");
}

Tensor avgpool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t padding) {
  return pool2d(x, k, stride, padding, PoolOp::Avg, "avgpool2d");
}

Tensor blur_downsample2d(const Tensor& x, std::size_t stride) {
  if (x.rank() != 4) throw std::invalid_argument("blur_downsample2d: input must be 4-D");
  if (stride < 1) throw std::invalid_argument("blur_downsample2d: stride must be >= 1");
  const std::array<double, 5>& taps = binomial5();
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t P = 2, K = 5;
  const std::int64_t S = static_cast<std::int64_t>(stride);
  const std::int64_t Ho = output_width(H, 5, 2, stride);
  const std::int64_t Wo = output_width(W, 5, 2, stride);

  Tensor out({static_cast<std::size_t>(B), static_cast<std::size_t>(C),
              static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)});
  const double* xd = x.data();
  double* od = out.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const double* plane = xd + (b * C + c) * H * W;
      double* oplane = od + (b * C + c) * Ho * Wo;
      for (std::int64_t oy = 0; oy < Ho; ++oy) {
        for (std::int64_t ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (std::int64_t ky = 0; ky < K; ++ky) {
            const std::int64_t iy = oy * S + ky - P;
            if (iy < 0 || iy >= H) continue;
            for (std::int64_t kx = 0; kx < K; ++kx) {
              const std::int64_t ix = ox * S + kx - P;
              if (ix < 0 || ix >= W) continue;
              acc += taps[ky] * taps[kx] * plane[iy * W + ix];
            }
          }
          oplane[oy * Wo + ox] = acc;
        }
      }
    }
  }
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 4) throw std::invalid_argument("global_avg_pool: input must be 4-D");
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor out({static_cast<std::size_t>(B), static_cast<std::size_t>(C)});
  const double* xd = x.data();
  double* od = out.data();
  const double inv = 1.0 / static_cast<double>(H * W);
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const double* plane = xd + (b * C + c) * H * W;
      double acc = 0.0;
      for (std::int64_t i = 0; i < H * W; ++i) acc += plane[i];
      od[b * C + c] = acc * inv;
    }
  }
  return out;
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (x.rank() != 2) throw std::invalid_argument("dense: input must be 2-D");
  if (weights.rank() != 2) throw std::invalid_argument("dense: weights must be 2-D");
  if (x.dim(1) != weights.dim(0))
    throw std::invalid_argument("dense: inner dimensions do not match");
  if (bias.rank() != 1 || bias.dim(0) != weights.dim(1))
    throw std::invalid_argument("dense: bias length must equal output features");
  const std::int64_t B = x.dim(0), F = x.dim(1), O = weights.dim(1);
  Tensor out({static_cast<std::size_t>(B), static_cast<std::size_t>(O)});
  const double* xd = x.data();
  const double* wd = weights.data();
  const double* bd = bias.data();
  double* od = out.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    double* orow = od + b * O;
    const double* xrow = xd + b * F;
    for (std::int64_t o = 0; o < O; ++o) orow[o] = bd[o];
    for (std::int64_t f = 0; f < F; ++f) {
      const double xv = xrow[f];
      const double* wrow = wd + f * O;
      for (std::int64_t o = 0; o < O; ++o) orow[o] += xv * wrow[o];
    }
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const double* xd = x.data();
  double* od = out.data();
  const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) od[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  return out;
}

SoftmaxLoss softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_cross_entropy: logits must be 2-D");
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  if (labels.size() != B)
    throw std::invalid_argument("softmax_cross_entropy: one label per row required");
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= C)
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
  }
  SoftmaxLoss result;
  result.probabilities = Tensor({B, C});
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = logits.data() + b * C;
    double m = row[0];
    for (std::size_t c = 1; c < C; ++c) m = std::max(m, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(row[c] - m);
    const double log_z = std::log(z);
    for (std::size_t c = 0; c < C; ++c) {
      result.probabilities.at2(b, c) = std::exp(row[c] - m) / z;
    }
    total += -(row[static_cast<std::size_t>(labels[b])] - m - log_z);
  }
  result.loss = total / static_cast<double>(B);
  return result;
}

}  // namespace shiftlab
