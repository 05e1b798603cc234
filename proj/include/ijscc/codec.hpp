#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ijscc/channel.hpp"
#include "ijscc/codec_config.hpp"
#include "ijscc/ops.hpp"
#include "ijscc/rng.hpp"
#include "ijscc/tensor.hpp"

namespace ijscc {

// Learnable multi-resolution channel input: level k is
// (L_k, H/2^(k-1), W/2^(k-1)).
struct PyramidSymbols {
  std::vector<Var> levels;

  std::size_t flat_size() const {
    std::size_t n = 0;
    for (const auto& l : levels) n += l->data.size();
    return n;
  }
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(flat_size());
    for (const auto& l : levels)
      out.insert(out.end(), l->data.begin(), l->data.end());
    return out;
  }
};

inline std::vector<Shape> pyramid_shapes(const CodecConfig& config, int height,
                                         int width) {
  config.validate();
  const int div = 1 << (config.levels - 1);
  if (height % div != 0 || width % div != 0)
    throw ConfigError("source dims must be divisible by 2^(L-1); pad first");
  std::vector<Shape> shapes;
  for (int k = 0; k < config.levels; ++k)
    shapes.push_back({config.level_channels[k], height >> k, width >> k});
  return shapes;
}

// Latents start i.i.d. N(0,1); the forward pass renormalizes every step, so
// only the direction of the initialization matters.
inline PyramidSymbols init_latents(const CodecConfig& config, int height,
                                   int width, RngStream& rng) {
  PyramidSymbols x;
  for (const Shape& s : pyramid_shapes(config, height, width)) {
    auto t = Tensor::make(s, rng.gaussians(s.size()), true);
    x.levels.push_back(t);
  }
  return x;
}

// Rebuilds a pyramid (gradient-free) from a flat real stream in level order.
inline PyramidSymbols pyramid_from_flat(const CodecConfig& config, int height,
                                        int width, const std::vector<double>& flat) {
  PyramidSymbols x;
  std::size_t pos = 0;
  for (const Shape& s : pyramid_shapes(config, height, width)) {
    if (pos + s.size() > flat.size())
      throw ShapeError("pyramid_from_flat: stream too short");
    x.levels.push_back(Tensor::make(
        s, std::vector<double>(flat.begin() + pos, flat.begin() + pos + s.size())));
    pos += s.size();
  }
  if (pos != flat.size()) throw ShapeError("pyramid_from_flat: stream too long");
  return x;
}

// theta: the shared ReDU kernel plus the LSM stack. Flat serialization order
// is fixed (kernel, then each layer's weights before its bias) so repetition
// coding and the artifact format are byte-deterministic.
struct DecoderParams {
  Var redu_kernel;          // (1, 8, 8)
  Var lsm_w1, lsm_b1;       // (1, 2*sum(L_k), d), (1, 1, d)
  Var lsm_w2, lsm_b2;       // (1, d, d), (1, 1, d)
  Var lsm_w3, lsm_b3;       // (1, d, C), (1, 1, C)
  Var conv_a_w, conv_a_b;   // (C*C, 3, 3), (1, 1, C)
  Var conv_b_w, conv_b_b;

  std::vector<Var> all() const {
    return {redu_kernel, lsm_w1, lsm_b1, lsm_w2, lsm_b2,
            lsm_w3, lsm_b3, conv_a_w, conv_a_b, conv_b_w, conv_b_b};
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    for (const auto& t : all())
      out.insert(out.end(), t->data.begin(), t->data.end());
    return out;
  }

  static DecoderParams zeros(const CodecConfig& c, bool requires_grad = false) {
    c.validate();
    const int s2 = 2 * c.sum_level_channels();
    const int d = c.hidden_dim;
    const int ch = c.source_channels;
    DecoderParams p;
    p.redu_kernel = Tensor::make({1, 8, 8}, requires_grad);
    p.lsm_w1 = Tensor::make({1, s2, d}, requires_grad);
    p.lsm_b1 = Tensor::make({1, 1, d}, requires_grad);
    p.lsm_w2 = Tensor::make({1, d, d}, requires_grad);
    p.lsm_b2 = Tensor::make({1, 1, d}, requires_grad);
    p.lsm_w3 = Tensor::make({1, d, ch}, requires_grad);
    p.lsm_b3 = Tensor::make({1, 1, ch}, requires_grad);
    p.conv_a_w = Tensor::make({ch * ch, 3, 3}, requires_grad);
    p.conv_a_b = Tensor::make({1, 1, ch}, requires_grad);
    p.conv_b_w = Tensor::make({ch * ch, 3, 3}, requires_grad);
    p.conv_b_b = Tensor::make({1, 1, ch}, requires_grad);
    return p;
  }

  static DecoderParams from_flat(const CodecConfig& c, const std::vector<double>& flat,
                                 bool requires_grad = false) {
    auto p = zeros(c, requires_grad);
    std::size_t pos = 0;
    for (auto& t : p.all()) {
      if (pos + t->data.size() > flat.size())
        throw ShapeError("DecoderParams::from_flat: vector too short");
      std::copy_n(flat.begin() + pos, t->data.size(), t->data.begin());
      pos += t->data.size();
    }
    if (pos != flat.size())
      throw ShapeError("DecoderParams::from_flat: vector too long");
    return p;
  }

  // ReDU kernel starts as the stride-2 bilinear upsampler embedded in the
  // 8x8 support; LSM weights uniform in +-sqrt(1/fan_in), biases zero.
  static DecoderParams init(const CodecConfig& c, RngStream& rng) {
    auto p = zeros(c, true);
    double w1d[8];
    for (int i = 0; i < 8; ++i)
      w1d[i] = std::max(0.0, 1.0 - std::abs(i - 3.5) / 2.0);
    for (int ky = 0; ky < 8; ++ky)
      for (int kx = 0; kx < 8; ++kx)
        p.redu_kernel->at(0, ky, kx) = w1d[ky] * w1d[kx];

    auto fill_uniform = [&rng](const Var& t, int fan_in) {
      const double a = std::sqrt(1.0 / fan_in);
      for (auto& v : t->data) v = rng.uniform(-a, a);
    };
    fill_uniform(p.lsm_w1, 2 * c.sum_level_channels());
    fill_uniform(p.lsm_w2, c.hidden_dim);
    fill_uniform(p.lsm_w3, c.hidden_dim);
    fill_uniform(p.conv_a_w, 9 * c.source_channels);
    fill_uniform(p.conv_b_w, 9 * c.source_channels);
    return p;
  }
};

// Recursive upsampling of the received pyramid (Recursive Denoising
// Upsampler). Starting from the coarsest level:
//   U_L = Upsample(y_L)
//   u_{k-1} = Concatenate(y_{k-1}, U_k),  k = L..2
//   U_{k-1} = Upsample(u_{k-1}),          k = L..3
// yielding u_1 with sum(L_k) channels at full resolution. For L == 1 the
// recursion degenerates to y_1 unchanged.
inline Var redu_forward(Tape& tape, const std::vector<Var>& y_levels,
                        const Var& kernel) {
  if (y_levels.empty()) throw ShapeError("redu_forward: no levels");
  const int levels = static_cast<int>(y_levels.size());
  if (levels == 1) return y_levels[0];

  Var up = ops::transposed_conv_depthwise(tape, y_levels[levels - 1], kernel);
  Var u;
  for (int k = levels; k >= 2; --k) {
    u = ops::concat_channels(tape, y_levels[k - 2], up);
    if (k >= 3) up = ops::transposed_conv_depthwise(tape, u, kernel);
  }
  return u;
}

// Common randomness M ~ N(0, sigma_w^2), shaped like the channel output and
// regenerated bit-exactly at the receiver from the synchronized seed.
struct CommonRandomness {
  std::vector<Var> levels;  // gradient-free constants
  std::uint64_t seed = 0;

  static CommonRandomness generate(const CodecConfig& config, int height,
                                   int width, double sigma_w_sq,
                                   std::uint64_t seed) {
    CommonRandomness m;
    m.seed = seed;
    RngStream rng(derive_key(seed, StreamTag::common_randomness));
    const double stddev = std::sqrt(sigma_w_sq);
    for (const Shape& s : pyramid_shapes(config, height, width))
      m.levels.push_back(Tensor::make(s, rng.gaussians(s.size(), stddev)));
    return m;
  }
};

// Nearest-neighbor expansion of each level to full resolution, concatenated
// in level order. Zero multiplies, so it does not touch the complexity count.
inline Var expand_common_randomness(const CommonRandomness& m) {
  if (m.levels.empty()) throw ShapeError("expand_common_randomness: no levels");
  const int height = m.levels[0]->shape.h;
  const int width = m.levels[0]->shape.w;
  int channels = 0;
  for (const auto& l : m.levels) channels += l->shape.c;

  auto out = Tensor::make({channels, height, width});
  int oc = 0;
  for (const auto& level : m.levels) {
    const int fy = height / level->shape.h;
    const int fx = width / level->shape.w;
    for (int c = 0; c < level->shape.c; ++c, ++oc)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
          out->at(oc, y, x) = level->at(c, y / fy, x / fx);
  }
  return out;
}

// Lightweight Synthesis Module: three 1x1 convolutions then two 3x3
// convolutions. ReLU after the first two 1x1 layers and the first 3x3; the
// output layer is linear (clamping to [0,1] happens only at evaluation).
inline Var lsm_forward(Tape& tape, const Var& u, const Var& m_up,
                       const DecoderParams& p) {
  Var x = ops::concat_channels(tape, u, m_up);
  x = ops::relu(tape, ops::conv1x1(tape, x, p.lsm_w1, p.lsm_b1));
  x = ops::relu(tape, ops::conv1x1(tape, x, p.lsm_w2, p.lsm_b2));
  x = ops::conv1x1(tape, x, p.lsm_w3, p.lsm_b3);
  x = ops::relu(tape, ops::conv3x3(tape, x, p.conv_a_w, p.conv_a_b));
  return ops::conv3x3(tape, x, p.conv_b_w, p.conv_b_b);
}

// Full receiver: ReDU over the noisy pyramid, concat with expanded common
// randomness, LSM synthesis. Pure function of its inputs.
inline Var decode_forward(Tape& tape, const std::vector<Var>& y_levels,
                          const DecoderParams& params, const CommonRandomness& m) {
  Var u = redu_forward(tape, y_levels, params.redu_kernel);
  Var m_up = expand_common_randomness(m);
  if (m_up->shape.c != u->shape.c || m_up->shape.h != u->shape.h ||
      m_up->shape.w != u->shape.w)
    throw ConfigError("decode_forward: common randomness shape mismatch");
  return lsm_forward(tape, u, m_up, params);
}

}  // namespace ijscc
