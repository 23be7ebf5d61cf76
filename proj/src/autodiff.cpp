#include "shiftlab/autodiff.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace shiftlab {

void ParameterSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("ParameterSet: duplicate name " + name);
  order_.push_back(name);
  values_.emplace(name, std::move(value));
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::invalid_argument("ParameterSet: unknown name " + name);
  return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::invalid_argument("ParameterSet: unknown name " + name);
  return it->second;
}

ParameterSet ParameterSet::zeros_like(const ParameterSet& other) {
  ParameterSet z;
  for (const std::string& name : other.order()) z.add(name, Tensor(other.at(name).shape()));
  return z;
}

std::string weight_name(std::size_t layer_index) {
  return "layer" + std::to_string(layer_index) + ".weight";
}
std::string bias_name(std::size_t layer_index) {
  return "layer" + std::to_string(layer_index) + ".bias";
}

namespace {

// Max pooling that records, per output cell, the flat input index of the
// first maximal window cell in row-major scan order (-1 when a padding cell
// holds the maximum).
Tensor maxpool2d_traced(const Tensor& x, std::size_t k, std::size_t stride, std::size_t padding,
                        std::vector<long long>& argmax) {
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t P = static_cast<std::int64_t>(padding);
  const std::int64_t S = static_cast<std::int64_t>(stride);
  const std::int64_t K = static_cast<std::int64_t>(k);
  const std::int64_t Ho = output_width(H, k, padding, stride);
  const std::int64_t Wo = output_width(W, k, padding, stride);
  Tensor out({static_cast<std::size_t>(B), static_cast<std::size_t>(C),
              static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)});
  argmax.assign(out.size(), -1);
  const double* xd = x.data();
  double* od = out.data();
  long long* am = argmax.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const double* plane = xd + (b * C + c) * H * W;
      const std::int64_t plane_base = (b * C + c) * H * W;
      for (std::int64_t oy = 0; oy < Ho; ++oy) {
        for (std::int64_t ox = 0; ox < Wo; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          long long best_idx = -1;
          for (std::int64_t ky = 0; ky < K; ++ky) {
            const std::int64_t iy = oy * S + ky - P;
            for (std::int64_t kx = 0; kx < K; ++kx) {
              const std::int64_t ix = ox * S + kx - P;
              const bool inside = iy >= 0 && iy < H && ix >= 0 && ix < W;
              const double v = inside ? plane[iy * W + ix] : 0.0;
              if (v > best) {
                best = v;
                best_idx = inside ? plane_base + iy * W + ix : -1;
              }
            }
          }
          const std::int64_t o = ((b * C + c) * Ho + oy) * Wo + ox;
          od[o] = best;
          am[o] = best_idx;
        }
      }
    }
  }
  return out;
}

Tensor conv2d_backward_input(const Tensor& weights, const Tensor& d_out,
                             const std::vector<std::size_t>& in_shape, std::size_t stride,
                             std::size_t padding) {
  const std::int64_t B = in_shape[0], Cin = in_shape[1], H = in_shape[2], W = in_shape[3];
  const std::int64_t Cout = weights.dim(0), K = weights.dim(2);
  const std::int64_t Ho = d_out.dim(2), Wo = d_out.dim(3);
  const std::int64_t P = static_cast<std::int64_t>(padding);
  const std::int64_t S = static_cast<std::int64_t>(stride);
  Tensor dx(in_shape);
  const double* wd = weights.data();
  const double* gd = d_out.data();
  double* dd = dx.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t ic = 0; ic < Cin; ++ic) {
      double* dplane = dd + (b * Cin + ic) * H * W;
      for (std::int64_t oc = 0; oc < Cout; ++oc) {
        const double* gplane = gd + (b * Cout + oc) * Ho * Wo;
        const double* wbase = wd + (oc * Cin + ic) * K * K;
        for (std::int64_t oy = 0; oy < Ho; ++oy) {
          for (std::int64_t ky = 0; ky < K; ++ky) {
            const std::int64_t iy = oy * S + ky - P;
            if (iy < 0 || iy >= H) continue;
            const double* grow = gplane + oy * Wo;
            double* drow = dplane + iy * W;
            const double* wrow = wbase + ky * K;
            for (std::int64_t kx = 0; kx < K; ++kx) {
              const double wv = wrow[kx];
              std::int64_t lo = 0;
              if (kx < P) lo = (P - kx + S - 1) / S;
              std::int64_t hi = Wo - 1;
              const std::int64_t ix_max = W - 1 + P - kx;
              if (ix_max < hi * S) hi = ix_max / S;
              for (std::int64_t ox = lo; ox <= hi; ++ox) {
                drow[ox * S + kx - P] += wv * grow[ox];
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

void conv2d_backward_params(const Tensor& x, const Tensor& d_out, std::size_t kernel,
                            std::size_t stride, std::size_t padding, Tensor& d_weights,
                            Tensor& d_bias) {
  const std::int64_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t Cout = d_out.dim(1), Ho = d_out.dim(2), Wo = d_out.dim(3);
  const std::int64_t K = static_cast<std::int64_t>(kernel);
  const std::int64_t P = static_cast<std::int64_t>(padding);
  const std::int64_t S = static_cast<std::int64_t>(stride);
  const double* xd = x.data();
  const double* gd = d_out.data();
  double* dw = d_weights.data();
  double* db = d_bias.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t oc = 0; oc < Cout; ++oc) {
    for (std::int64_t ic = 0; ic < Cin; ++ic) {
      double* wbase = dw + (oc * Cin + ic) * K * K;
      for (std::int64_t b = 0; b < B; ++b) {
        const double* gplane = gd + (b * Cout + oc) * Ho * Wo;
        const double* xplane = xd + (b * Cin + ic) * H * W;
        for (std::int64_t oy = 0; oy < Ho; ++oy) {
          const double* grow = gplane + oy * Wo;
          for (std::int64_t ky = 0; ky < K; ++ky) {
            const std::int64_t iy = oy * S + ky - P;
            if (iy < 0 || iy >= H) continue;
            const double* xrow = xplane + iy * W;
            double* wrow = wbase + ky * K;
            for (std::int64_t kx = 0; kx < K; ++kx) {
              std::int64_t lo = 0;
              if (kx < P) lo = (P - kx + S - 1) / S;
              std::int64_t hi = Wo - 1;
              const std::int64_t ix_max = W - 1 + P - kx;
              if (ix_max < hi * S) hi = ix_max / S;
              double acc = 0.0;
              for (std::int64_t ox = lo; ox <= hi; ++ox) {
                acc += grow[ox] * xrow[ox * S + kx - P];
              }
              wrow[kx] += acc;
            }
          }
        }
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t oc = 0; oc < Cout; ++oc) {
    double acc = 0.0;
    for (std::int64_t b = 0; b < B; ++b) {
      const double* gplane = gd + (b * Cout + oc) * Ho * Wo;
      for (std::int64_t i = 0; i < Ho * Wo; ++i) acc += gplane[i];
    }
    db[oc] += acc;
  }
}

Tensor maxpool2d_backward(const std::vector<long long>& argmax, const Tensor& d_out,
                          const std::vector<std::size_t>& in_shape) {
  Tensor dx(in_shape);
  const std::int64_t B = in_shape[0], C = in_shape[1];
  const std::int64_t oplane = static_cast<std::int64_t>(d_out.dim(2) * d_out.dim(3));
  const double* gd = d_out.data();
  double* dd = dx.data();
  const long long* am = argmax.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const std::int64_t obase = (b * C + c) * oplane;
      for (std::int64_t i = 0; i < oplane; ++i) {
        const long long src = am[obase + i];
        if (src >= 0) dd[src] += gd[obase + i];
      }
    }
  }
  return dx;
}

Tensor avgpool2d_backward(const Tensor& d_out, const std::vector<std::size_t>& in_shape,
                          std::size_t k, std::size_t stride, std::size_t padding) {
  const std::int64_t B = in_shape[0], C = in_shape[1], H = in_shape[2], W = in_shape[3];
  const std::int64_t Ho = d_out.dim(2), Wo = d_out.dim(3);
  const std::int64_t K = static_cast<std::int64_t>(k);
  const std::int64_t P = static_cast<std::int64_t>(padding);
  const std::int64_t S = static_cast<std::int64_t>(stride);
  const double inv_area = 1.0 / (static_cast<double>(k) * static_cast<double>(k));
  Tensor dx(in_shape);
  const double* gd = d_out.data();
  double* dd = dx.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const double* gplane = gd + (b * C + c) * Ho * Wo;
      double* dplane = dd + (b * C + c) * H * W;
      for (std::int64_t oy = 0; oy < Ho; ++oy) {
        for (std::int64_t ox = 0; ox < Wo; ++ox) {
          const double g = gplane[oy * Wo + ox] * inv_area;
          for (std::int64_t ky = 0; ky < K; ++ky) {
            const std::int64_t iy = oy * S + ky - P;
            if (iy < 0 || iy >= H) continue;
            for (std::int64_t kx = 0; kx < K; ++kx) {
              const std::int64_t ix = ox * S + kx - P;
              if (ix < 0 || ix >= W) continue;
              dplane[iy * W + ix] += g;
            }
          }
        }
      }
    }
  }
  return dx;
}

Tensor blur_downsample2d_backward(const Tensor& d_out, const std::vector<std::size_t>& in_shape,
                                  std::size_t stride) {
  const std::array<double, 5>& taps = binomial5();
  const std::int64_t B = in_shape[0], C = in_shape[1], H = in_shape[2], W = in_shape[3];
  const std::int64_t Ho = d_out.dim(2), Wo = d_out.dim(3);
  const std::int64_t S = static_cast<std::int64_t>(stride);
  Tensor dx(in_shape);
  const double* gd = d_out.data();
  double* dd = dx.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const double* gplane = gd + (b * C + c) * Ho * Wo;
      double* dplane = dd + (b * C + c) * H * W;
      for (std::int64_t oy = 0; oy < Ho; ++oy) {
        for (std::int64_t ox = 0; ox < Wo; ++ox) {
          const double g = gplane[oy * Wo + ox];
          for (std::int64_t ky = 0; ky < 5; ++ky) {
            const std::int64_t iy = oy * S + ky - 2;
            if (iy < 0 || iy >= H) continue;
            for (std::int64_t kx = 0; kx < 5; ++kx) {
              const std::int64_t ix = ox * S + kx - 2;
              if (ix < 0 || ix >= W) continue;
              dplane[iy * W + ix] += taps[ky] * taps[kx] * g;
            }
          }
        }
      }
    }
  }
  return dx;
}

Tensor global_avg_pool_backward(const Tensor& d_out, const std::vector<std::size_t>& in_shape) {
  const std::int64_t B = in_shape[0], C = in_shape[1], H = in_shape[2], W = in_shape[3];
  Tensor dx(in_shape);
  const double* gd = d_out.data();
  double* dd = dx.data();
  const double inv = 1.0 / static_cast<double>(H * W);
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const double g = gd[b * C + c] * inv;
      double* dplane = dd + (b * C + c) * H * W;
      for (std::int64_t i = 0; i < H * W; ++i) dplane[i] = g;
    }
  }
  return dx;
}

void dense_backward_fast(const Tensor& x, const Tensor& weights, const Tensor& d_out, Tensor& dx,
                         Tensor& dw, Tensor& db) {
  const std::int64_t B = x.dim(0), F = x.dim(1), O = weights.dim(1);
  const double* xd = x.data();
  const double* wd = weights.data();
  const double* gd = d_out.data();
  double* dxd = dx.data();
  double* dwd = dw.data();
  double* dbd = db.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    const double* grow = gd + b * O;
    double* dxrow = dxd + b * F;
    for (std::int64_t f = 0; f < F; ++f) {
      const double* wrow = wd + f * O;
      double acc = 0.0;
      for (std::int64_t o = 0; o < O; ++o) acc += wrow[o] * grow[o];
      dxrow[f] = acc;
    }
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t f = 0; f < F; ++f) {
    double* dwrow = dwd + f * O;
    for (std::int64_t b = 0; b < B; ++b) {
      const double xv = xd[b * F + f];
      const double* grow = gd + b * O;
      for (std::int64_t o = 0; o < O; ++o) dwrow[o] += xv * grow[o];
    }
  }
  for (std::int64_t o = 0; o < O; ++o) {
    double acc = 0.0;
    for (std::int64_t b = 0; b < B; ++b) acc += gd[b * O + o];
    dbd[o] += acc;
  }
}

Tensor relu_backward(const Tensor& x, const Tensor& d_out) {
  Tensor dx(x.shape());
  const double* xd = x.data();
  const double* gd = d_out.data();
  double* dd = dx.data();
  const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) dd[i] = xd[i] > 0.0 ? gd[i] : 0.0;
  return dx;
}

struct Trace {
  std::vector<Tensor> acts;                              // acts[i] feeds layer i
  std::map<std::size_t, std::vector<long long>> argmax;  // per max-pool layer
};

Tensor run_forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& x,
                   Trace* trace) {
  if (x.rank() != 4) throw std::invalid_argument("forward: batch must be 4-D");
  if (x.dim(1) != spec.in_channels || x.dim(2) != spec.in_height || x.dim(3) != spec.in_width)
    throw std::invalid_argument("forward: batch shape does not match the network input");
  Tensor cur = x;
  if (trace) trace->acts.push_back(cur);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::Conv2D:
        cur = conv2d(cur, params.at(weight_name(i)), params.at(bias_name(i)), l.stride, l.padding);
        break;
      case LayerKind::MaxPool2D:
        if (trace) {
          cur = maxpool2d_traced(cur, l.kernel, l.stride, l.padding, trace->argmax[i]);
        } else {
          cur = maxpool2d(cur, l.kernel, l.stride, l.padding);
        }
        break;
      case LayerKind::AvgPool2D:
        cur = avgpool2d(cur, l.kernel, l.stride, l.padding);
        break;
      case LayerKind::BlurPool2D:
        cur = blur_downsample2d(cur, l.stride);
        break;
      case LayerKind::GlobalAvgPool:
        cur = global_avg_pool(cur);
        break;
      case LayerKind::Dense: {
        const Tensor flat =
            cur.rank() == 4 ? cur.reshaped({cur.dim(0), cur.dim(1) * cur.dim(2) * cur.dim(3)})
                            : cur;
        cur = dense(flat, params.at(weight_name(i)), params.at(bias_name(i)));
        break;
      }
      case LayerKind::ReLU:
        cur = relu(cur);
        break;
    }
    if (trace) trace->acts.push_back(cur);
  }
  return cur;
}

}  // namespace

Tensor forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& x) {
  return run_forward(spec, params, x, nullptr);
}

BackwardResult backward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch,
                        const std::vector<int>& labels) {
  Trace trace;
  const Tensor logits = run_forward(spec, params, batch, &trace);
  const SoftmaxLoss sm = softmax_cross_entropy(logits, labels);

  BackwardResult result;
  result.loss = sm.loss;
  result.probabilities = sm.probabilities;

  // d(mean CE)/d(logits) = (softmax - one_hot) / batch_size
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  Tensor grad({B, C});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double onehot = (static_cast<std::size_t>(labels[b]) == c) ? 1.0 : 0.0;
      grad.at2(b, c) = (sm.probabilities.at2(b, c) - onehot) / static_cast<double>(B);
    }
  }

  ParameterSet grads;
  for (const std::string& name : params.order()) grads.add(name, Tensor(params.at(name).shape()));

  for (std::size_t idx = spec.layers.size(); idx-- > 0;) {
    const LayerSpec& l = spec.layers[idx];
    const Tensor& input = trace.acts[idx];
    switch (l.kind) {
      case LayerKind::Conv2D: {
        conv2d_backward_params(input, grad, l.kernel, l.stride, l.padding,
                               grads.at(weight_name(idx)), grads.at(bias_name(idx)));
        grad = conv2d_backward_input(params.at(weight_name(idx)), grad, input.shape(), l.stride,
                                     l.padding);
        break;
      }
      case LayerKind::MaxPool2D:
        grad = maxpool2d_backward(trace.argmax[idx], grad, input.shape());
        break;
      case LayerKind::AvgPool2D:
        grad = avgpool2d_backward(grad, input.shape(), l.kernel, l.stride, l.padding);
        break;
      case LayerKind::BlurPool2D:
        grad = blur_downsample2d_backward(grad, input.shape(), l.stride);
        break;
      case LayerKind::GlobalAvgPool:
        grad = global_avg_pool_backward(grad, input.shape());
        break;
      case LayerKind::Dense: {
        const Tensor flat = input.rank() == 4
                                ? input.reshaped({input.dim(0), input.dim(1) * input.dim(2) *
                                                                    input.dim(3)})
                                : input;
        Tensor dx({flat.dim(0), flat.dim(1)});
        dense_backward_fast(flat, params.at(weight_name(idx)), grad, dx,
                            grads.at(weight_name(idx)), grads.at(bias_name(idx)));
        grad = input.rank() == 4 ? dx.reshaped(input.shape()) : std::move(dx);
        break;
      }
      case LayerKind::ReLU:
        grad = relu_backward(input, grad);
        break;
    }
  }
  result.gradients = std::move(grads);
  return result;
}

}  // namespace shiftlab
