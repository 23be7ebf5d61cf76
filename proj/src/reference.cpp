#include "shiftlab/reference.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "shiftlab/layers.hpp"

namespace shiftlab::reference {

namespace {

double padded_at(const Tensor& x, std::size_t b, std::size_t c, long long y, long long x_pos) {
  if (y < 0 || x_pos < 0 || y >= static_cast<long long>(x.dim(2)) ||
      x_pos >= static_cast<long long>(x.dim(3)))
    return 0.0;
  return x.at4(b, c, static_cast<std::size_t>(y), static_cast<std::size_t>(x_pos));
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weights, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  const std::size_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Cout = weights.dim(0), K = weights.dim(2);
  if (weights.dim(1) != Cin) throw std::invalid_argument("reference::conv2d: channel mismatch");
  const std::size_t Ho = output_width(H, K, padding, stride);
  const std::size_t Wo = output_width(W, K, padding, stride);
  Tensor out({B, Cout, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t oc = 0; oc < Cout; ++oc)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = bias[oc];
          for (std::size_t ic = 0; ic < Cin; ++ic)
            for (std::size_t ky = 0; ky < K; ++ky)
              for (std::size_t kx = 0; kx < K; ++kx) {
                const long long iy = static_cast<long long>(oy * stride + ky) -
                                     static_cast<long long>(padding);
                const long long ix = static_cast<long long>(ox * stride + kx) -
                                     static_cast<long long>(padding);
                acc += weights.at4(oc, ic, ky, kx) * padded_at(x, b, ic, iy, ix);
              }
          out.at4(b, oc, oy, ox) = acc;
        }
  return out;
}

Tensor maxpool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t padding) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = output_width(H, k, padding, stride);
  const std::size_t Wo = output_width(W, k, padding, stride);
  Tensor out({B, C, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double m = -std::numeric_limits<double>::infinity();
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long long iy = static_cast<long long>(oy * stride + ky) -
                                   static_cast<long long>(padding);
              const long long ix = static_cast<long long>(ox * stride + kx) -
                                   static_cast<long long>(padding);
              m = std::max(m, padded_at(x, b, c, iy, ix));
            }
          out.at4(b, c, oy, ox) = m;
        }
  return out;
}

Tensor avgpool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t padding) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = output_width(H, k, padding, stride);
  const std::size_t Wo = output_width(W, k, padding, stride);
  Tensor out({B, C, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long long iy = static_cast<long long>(oy * stride + ky) -
                                   static_cast<long long>(padding);
              const long long ix = static_cast<long long>(ox * stride + kx) -
                                   static_cast<long long>(padding);
              acc += padded_at(x, b, c, iy, ix);
            }
          out.at4(b, c, oy, ox) = acc / static_cast<double>(k * k);
        }
  return out;
}

Tensor blur_downsample2d(const Tensor& x, std::size_t stride) {
  const std::array<double, 5>& taps = binomial5();
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = output_width(H, 5, 2, stride);
  const std::size_t Wo = output_width(W, 5, 2, stride);
  Tensor out({B, C, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < 5; ++ky)
            for (std::size_t kx = 0; kx < 5; ++kx) {
              const long long iy = static_cast<long long>(oy * stride + ky) - 2;
              const long long ix = static_cast<long long>(ox * stride + kx) - 2;
              acc += taps[ky] * taps[kx] * padded_at(x, b, c, iy, ix);
            }
          out.at4(b, c, oy, ox) = acc;
        }
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor out({B, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) acc += x.at4(b, c, y, xx);
      out.at2(b, c) = acc / static_cast<double>(H * W);
    }
  return out;
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  const std::size_t B = x.dim(0), F = x.dim(1), O = weights.dim(1);
  if (weights.dim(0) != F) throw std::invalid_argument("reference::dense: dimension mismatch");
  Tensor out({B, O});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o) {
      double acc = bias[o];
      for (std::size_t f = 0; f < F; ++f) acc += x.at2(b, f) * weights.at2(f, o);
      out.at2(b, o) = acc;
    }
  return out;
}

ConvGradients conv2d_backward(const Tensor& x, const Tensor& weights, const Tensor& d_out,
                              std::size_t stride, std::size_t padding) {
  const std::size_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Cout = weights.dim(0), K = weights.dim(2);
  const std::size_t Ho = d_out.dim(2), Wo = d_out.dim(3);
  ConvGradients g{Tensor(x.shape()), Tensor(weights.shape()), Tensor({Cout})};
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t oc = 0; oc < Cout; ++oc)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          const double go = d_out.at4(b, oc, oy, ox);
          g.d_bias[oc] += go;
          for (std::size_t ic = 0; ic < Cin; ++ic)
            for (std::size_t ky = 0; ky < K; ++ky)
              for (std::size_t kx = 0; kx < K; ++kx) {
                const long long iy = static_cast<long long>(oy * stride + ky) -
                                     static_cast<long long>(padding);
                const long long ix = static_cast<long long>(ox * stride + kx) -
                                     static_cast<long long>(padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<long long>(H) ||
                    ix >= static_cast<long long>(W))
                  continue;
                g.d_weights.at4(oc, ic, ky, kx) +=
                    go * x.at4(b, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                g.d_input.at4(b, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                    go * weights.at4(oc, ic, ky, kx);
              }
        }
  return g;
}

DenseGradients dense_backward(const Tensor& x, const Tensor& weights, const Tensor& d_out) {
  const std::size_t B = x.dim(0), F = x.dim(1), O = weights.dim(1);
  DenseGradients g{Tensor({B, F}), Tensor({F, O}), Tensor({O})};
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o) {
      const double go = d_out.at2(b, o);
      g.d_bias[o] += go;
      for (std::size_t f = 0; f < F; ++f) {
        g.d_weights.at2(f, o) += x.at2(b, f) * go;
        g.d_input.at2(b, f) += weights.at2(f, o) * go;
      }
    }
  return g;
}

}  // namespace shiftlab::reference
