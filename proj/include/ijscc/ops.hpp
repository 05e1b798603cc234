#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ijscc/tensor.hpp"

namespace ijscc {
namespace ops {

// Transposed convolution with a single 8x8 kernel shared across all input
// channels (depthwise, no bias). Stride 2, padding 3 -> output is exactly
// (2h, 2w).
inline Var transposed_conv_depthwise(Tape& tape, const Var& input, const Var& kernel) {
  constexpr int ks = 8, stride = 2, pad = 3;
  if (kernel->shape != Shape{1, ks, ks})
    throw ConfigError("transposed_conv_depthwise expects a 1x8x8 kernel");
  const Shape is = input->shape;
  if (is.c < 1 || is.h < 1 || is.w < 1)
    throw ShapeError("transposed_conv_depthwise: empty input");
  const Shape os{is.c, 2 * is.h, 2 * is.w};

  auto out = Tensor::make(os, input->requires_grad || kernel->requires_grad);
  for (int c = 0; c < is.c; ++c)
    for (int iy = 0; iy < is.h; ++iy)
      for (int ix = 0; ix < is.w; ++ix) {
        const double v = input->at(c, iy, ix);
        for (int ky = 0; ky < ks; ++ky) {
          const int oy = iy * stride + ky - pad;
          if (oy < 0 || oy >= os.h) continue;
          for (int kx = 0; kx < ks; ++kx) {
            const int ox = ix * stride + kx - pad;
            if (ox < 0 || ox >= os.w) continue;
            out->at(c, oy, ox) += v * kernel->at(0, ky, kx);
          }
        }
      }

  tape.record(out, [input, kernel, out, is, os] {
    for (int c = 0; c < is.c; ++c)
      for (int iy = 0; iy < is.h; ++iy)
        for (int ix = 0; ix < is.w; ++ix) {
          double gin = 0.0;
          const double v = input->at(c, iy, ix);
          for (int ky = 0; ky < ks; ++ky) {
            const int oy = iy * stride + ky - pad;
            if (oy < 0 || oy >= os.h) continue;
            for (int kx = 0; kx < ks; ++kx) {
              const int ox = ix * stride + kx - pad;
              if (ox < 0 || ox >= os.w) continue;
              const double go =
                  out->grad[(static_cast<std::size_t>(c) * os.h + oy) * os.w + ox];
              gin += go * kernel->at(0, ky, kx);
              if (kernel->requires_grad) {
                kernel->ensure_grad();
                kernel->grad[static_cast<std::size_t>(ky) * ks + kx] += go * v;
              }
            }
          }
          if (input->requires_grad) {
            input->ensure_grad();
            input->grad[(static_cast<std::size_t>(c) * is.h + iy) * is.w + ix] += gin;
          }
        }
  });
  return out;
}

// Per-pixel linear map: weights is (1, c_in, c_out), bias is (1, 1, c_out).
inline Var conv1x1(Tape& tape, const Var& input, const Var& weights, const Var& bias) {
  const Shape is = input->shape;
  const int c_in = weights->shape.h, c_out = weights->shape.w;
  if (weights->shape.c != 1 || is.c != c_in)
    throw ConfigError("conv1x1: weight rows must equal input channels");
  if (bias->shape != Shape{1, 1, c_out})
    throw ConfigError("conv1x1: bias length must equal output channels");

  const Shape os{c_out, is.h, is.w};
  const std::size_t npix = static_cast<std::size_t>(is.h) * is.w;
  auto out = Tensor::make(os, input->requires_grad || weights->requires_grad ||
                                  bias->requires_grad);
  for (int o = 0; o < c_out; ++o) {
    const double b = bias->data[o];
    for (std::size_t p = 0; p < npix; ++p) {
      double acc = b;
      for (int i = 0; i < c_in; ++i)
        acc += input->data[i * npix + p] * weights->data[i * c_out + o];
      out->data[o * npix + p] = acc;
    }
  }

  tape.record(out, [input, weights, bias, out, c_in, c_out, npix] {
    if (input->requires_grad) input->ensure_grad();
    if (weights->requires_grad) weights->ensure_grad();
    if (bias->requires_grad) bias->ensure_grad();
    for (int o = 0; o < c_out; ++o)
      for (std::size_t p = 0; p < npix; ++p) {
        const double go = out->grad[o * npix + p];
        if (go == 0.0) continue;
        if (bias->requires_grad) bias->grad[o] += go;
        for (int i = 0; i < c_in; ++i) {
          if (input->requires_grad)
            input->grad[i * npix + p] += go * weights->data[i * c_out + o];
          if (weights->requires_grad)
            weights->grad[i * c_out + o] += go * input->data[i * npix + p];
        }
      }
  });
  return out;
}

// 3x3 cross-correlation, stride 1, zero padding 1 (same-size output).
// Weights are stored as (c_out*c_in, 3, 3), bias as (1, 1, c_out).
inline Var conv3x3(Tape& tape, const Var& input, const Var& weights, const Var& bias) {
  const Shape is = input->shape;
  if (weights->shape.h != 3 || weights->shape.w != 3 ||
      weights->shape.c % is.c != 0)
    throw ConfigError("conv3x3: weights must be (c_out*c_in, 3, 3)");
  const int c_in = is.c;
  const int c_out = weights->shape.c / c_in;
  if (bias->shape != Shape{1, 1, c_out})
    throw ConfigError("conv3x3: bias length must equal output channels");

  const Shape os{c_out, is.h, is.w};
  auto out = Tensor::make(os, input->requires_grad || weights->requires_grad ||
                                  bias->requires_grad);
  for (int o = 0; o < c_out; ++o)
    for (int y = 0; y < is.h; ++y)
      for (int x = 0; x < is.w; ++x) {
        double acc = bias->data[o];
        for (int i = 0; i < c_in; ++i)
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= is.h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = x + kx - 1;
              if (sx < 0 || sx >= is.w) continue;
              acc += input->at(i, sy, sx) * weights->at(o * c_in + i, ky, kx);
            }
          }
        out->at(o, y, x) = acc;
      }

  tape.record(out, [input, weights, bias, out, c_in, c_out, is] {
    if (input->requires_grad) input->ensure_grad();
    if (weights->requires_grad) weights->ensure_grad();
    if (bias->requires_grad) bias->ensure_grad();
    for (int o = 0; o < c_out; ++o)
      for (int y = 0; y < is.h; ++y)
        for (int x = 0; x < is.w; ++x) {
          const double go =
              out->grad[(static_cast<std::size_t>(o) * is.h + y) * is.w + x];
          if (go == 0.0) continue;
          if (bias->requires_grad) bias->grad[o] += go;
          for (int i = 0; i < c_in; ++i)
            for (int ky = 0; ky < 3; ++ky) {
              const int sy = y + ky - 1;
              if (sy < 0 || sy >= is.h) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int sx = x + kx - 1;
                if (sx < 0 || sx >= is.w) continue;
                const std::size_t ii =
                    (static_cast<std::size_t>(i) * is.h + sy) * is.w + sx;
                const std::size_t wi =
                    (static_cast<std::size_t>(o * c_in + i) * 3 + ky) * 3 + kx;
                if (input->requires_grad) input->grad[ii] += go * weights->data[wi];
                if (weights->requires_grad) weights->grad[wi] += go * input->data[ii];
              }
            }
        }
  });
  return out;
}

inline Var concat_channels(Tape& tape, const Var& a, const Var& b) {
  if (a->shape.h != b->shape.h || a->shape.w != b->shape.w)
    throw ShapeError("concat_channels: spatial dimensions differ");
  const Shape os{a->shape.c + b->shape.c, a->shape.h, a->shape.w};
  auto out = Tensor::make(os, a->requires_grad || b->requires_grad);
  std::copy(a->data.begin(), a->data.end(), out->data.begin());
  std::copy(b->data.begin(), b->data.end(), out->data.begin() + a->data.size());

  tape.record(out, [a, b, out] {
    const std::size_t na = a->data.size();
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < na; ++i) a->grad[i] += out->grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < b->data.size(); ++i)
        b->grad[i] += out->grad[na + i];
    }
  });
  return out;
}

inline Var slice_channels(Tape& tape, const Var& input, int begin, int count) {
  if (begin < 0 || count < 1 || begin + count > input->shape.c)
    throw ShapeError("slice_channels: range out of bounds");
  const std::size_t npix =
      static_cast<std::size_t>(input->shape.h) * input->shape.w;
  auto out = Tensor::make({count, input->shape.h, input->shape.w},
                          input->requires_grad);
  std::copy_n(input->data.begin() + begin * npix, count * npix, out->data.begin());
  tape.record(out, [input, out, begin, npix] {
    if (!input->requires_grad) return;
    input->ensure_grad();
    for (std::size_t i = 0; i < out->data.size(); ++i)
      input->grad[begin * npix + i] += out->grad[i];
  });
  return out;
}

// Elementwise sum with a gradient-free noise tensor; identity Jacobian
// towards the input (the noise is a constant of the backward pass).
inline Var add_constant_noise(Tape& tape, const Var& input,
                              const std::vector<double>& noise) {
  if (noise.size() != input->data.size())
    throw ShapeError("add_constant_noise: size mismatch");
  auto out = Tensor::make(input->shape, input->requires_grad);
  for (std::size_t i = 0; i < noise.size(); ++i)
    out->data[i] = input->data[i] + noise[i];
  tape.record(out, [input, out] {
    if (!input->requires_grad) return;
    input->ensure_grad();
    for (std::size_t i = 0; i < out->grad.size(); ++i)
      input->grad[i] += out->grad[i];
  });
  return out;
}

inline Var relu(Tape& tape, const Var& input) {
  auto out = Tensor::make(input->shape, input->requires_grad);
  for (std::size_t i = 0; i < input->data.size(); ++i)
    out->data[i] = std::max(0.0, input->data[i]);
  tape.record(out, [input, out] {
    if (!input->requires_grad) return;
    input->ensure_grad();
    for (std::size_t i = 0; i < out->grad.size(); ++i)
      if (input->data[i] > 0.0) input->grad[i] += out->grad[i];
  });
  return out;
}

// Jointly rescales a group of tensors so the concatenated stream has unit
// average power per complex symbol (two reals per symbol):
//   scale = sqrt(n / (2 * sum(x^2))).
// Differentiable through the norm.
inline std::vector<Var> power_normalize(Tape& tape, const std::vector<Var>& group) {
  std::size_t n = 0;
  double sumsq = 0.0;
  for (const auto& t : group) {
    n += t->data.size();
    for (double v : t->data) sumsq += v * v;
  }
  if (n == 0) throw ShapeError("power_normalize: empty input");
  if (sumsq == 0.0) throw ShapeError("power_normalize: all-zero input is degenerate");
  const double scale = std::sqrt(static_cast<double>(n) / (2.0 * sumsq));

  std::vector<Var> outs;
  outs.reserve(group.size());
  for (const auto& t : group) {
    auto out = Tensor::make(t->shape, t->requires_grad);
    for (std::size_t i = 0; i < t->data.size(); ++i)
      out->data[i] = t->data[i] * scale;
    outs.push_back(out);
  }

  // d out_j / d x_i = scale * delta_ij - scale * x_i * x_j / sumsq,
  // coupling every output to every input through the shared norm.
  tape.record(outs.back(), [group, outs, scale, sumsq] {
    double dot = 0.0;  // sum_j g_j * x_j across the whole group
    for (std::size_t t = 0; t < group.size(); ++t)
      for (std::size_t i = 0; i < group[t]->data.size(); ++i)
        dot += outs[t]->grad[i] * group[t]->data[i];
    for (std::size_t t = 0; t < group.size(); ++t) {
      if (!group[t]->requires_grad) continue;
      group[t]->ensure_grad();
      for (std::size_t i = 0; i < group[t]->data.size(); ++i)
        group[t]->grad[i] += scale * outs[t]->grad[i] -
                             scale * group[t]->data[i] * dot / sumsq;
    }
  });
  // Record the remaining outputs as no-op nodes so backward zeroes their
  // gradient buffers like any other intermediate.
  for (std::size_t t = 0; t + 1 < outs.size(); ++t) tape.record(outs[t], nullptr);
  return outs;
}

inline Var power_normalize(Tape& tape, const Var& t) {
  return power_normalize(tape, std::vector<Var>{t})[0];
}

inline Var sum_all(Tape& tape, const Var& input) {
  auto out = Tensor::make({1, 1, 1}, input->requires_grad);
  double s = 0.0;
  for (double v : input->data) s += v;
  out->data[0] = s;
  tape.record(out, [input, out] {
    if (!input->requires_grad) return;
    input->ensure_grad();
    for (auto& g : input->grad) g += out->grad[0];
  });
  return out;
}

// Mean squared error against a gradient-free target; returns a scalar.
inline Var mse_loss(Tape& tape, const Var& pred, const Var& target) {
  if (pred->shape != target->shape) throw ShapeError("mse_loss: shape mismatch");
  auto out = Tensor::make({1, 1, 1}, pred->requires_grad);
  const std::size_t n = pred->data.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred->data[i] - target->data[i];
    acc += d * d;
  }
  out->data[0] = acc / static_cast<double>(n);
  tape.record(out, [pred, target, out, n] {
    if (!pred->requires_grad) return;
    pred->ensure_grad();
    const double g = 2.0 * out->grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      pred->grad[i] += g * (pred->data[i] - target->data[i]);
  });
  return out;
}

}  // namespace ops
}  // namespace ijscc
