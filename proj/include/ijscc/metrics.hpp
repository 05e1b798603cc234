#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ijscc/codec_config.hpp"
#include "ijscc/errors.hpp"
#include "ijscc/tensor.hpp"

namespace ijscc {

struct QualityReport {
  double psnr_db = 0.0;
  double ms_ssim = 0.0;
  double ms_ssim_db = 0.0;  // -10*log10(1 - ms_ssim)
  double mults_per_pixel = 0.0;
  std::size_t param_total = 0;
};

// 10*log10(1/MSE) on [0,1]-range images; zero MSE caps at 100 dB.
inline double psnr(const Var& a, const Var& b) {
  if (a->shape != b->shape) throw ShapeError("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < a->data.size(); ++i) {
    const double d = a->data[i] - b->data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a->data.size());
  if (mse <= 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

// Per-channel planes as plain buffers for the SSIM pipeline.
struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline std::vector<double> gaussian_window_11(double sigma = 1.5) {
  std::vector<double> g(11);
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5.0;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (auto& x : g) x /= sum;
  return g;
}

// Valid-region separable Gaussian filter (output is (h-10) x (w-10)).
inline Plane gauss_filter_valid(const Plane& p) {
  static const std::vector<double> g = gaussian_window_11();
  Plane tmp{p.h, p.w - 10, {}};
  tmp.v.resize(static_cast<std::size_t>(tmp.h) * tmp.w);
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < tmp.w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 11; ++k) acc += g[k] * p.at(y, x + k);
      tmp.v[static_cast<std::size_t>(y) * tmp.w + x] = acc;
    }
  Plane out{p.h - 10, p.w - 10, {}};
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 11; ++k) acc += g[k] * tmp.at(y + k, x);
      out.v[static_cast<std::size_t>(y) * out.w + x] = acc;
    }
  return out;
}

// 2x2 mean pooling (floor division of dims).
inline Plane downsample2(const Plane& p) {
  Plane out{p.h / 2, p.w / 2, {}};
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      out.v[static_cast<std::size_t>(y) * out.w + x] =
          0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) +
                  p.at(2 * y + 1, 2 * x) + p.at(2 * y + 1, 2 * x + 1));
  return out;
}

// Mean luminance term and contrast-structure term at one scale.
inline std::pair<double, double> ssim_terms(const Plane& a, const Plane& b) {
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // data range 1.0
  Plane mu_a = gauss_filter_valid(a), mu_b = gauss_filter_valid(b);
  Plane aa{a.h, a.w, {}}, bb{a.h, a.w, {}}, ab{a.h, a.w, {}};
  aa.v.resize(a.v.size());
  bb.v.resize(a.v.size());
  ab.v.resize(a.v.size());
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    aa.v[i] = a.v[i] * a.v[i];
    bb.v[i] = b.v[i] * b.v[i];
    ab.v[i] = a.v[i] * b.v[i];
  }
  Plane saa = gauss_filter_valid(aa), sbb = gauss_filter_valid(bb),
        sab = gauss_filter_valid(ab);
  double lum = 0.0, cs = 0.0;
  const std::size_t n = mu_a.v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    const double va = saa.v[i] - ma * ma;
    const double vb = sbb.v[i] - mb * mb;
    const double cov = sab.v[i] - ma * mb;
    lum += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    cs += (2.0 * cov + c2) / (va + vb + c2);
  }
  return {lum / n, cs / n};
}

}  // namespace detail

// Multi-scale SSIM with an 11x11 Gaussian window (sigma 1.5) and the
// standard scale weights, renormalized when fewer than 5 scales are used.
// Channels are scored independently and averaged.
inline double ms_ssim(const Var& a, const Var& b, int scales = 5) {
  if (a->shape != b->shape) throw ShapeError("ms_ssim: shape mismatch");
  if (scales < 1 || scales > 5) throw ConfigError("ms_ssim: scales must be in [1,5]");
  const int min_side = std::min(a->shape.h, a->shape.w);
  const int needed = 11 << (scales - 1);
  if (min_side < needed)
    throw ConfigError("ms_ssim: image side must be >= " + std::to_string(needed) +
                      " for " + std::to_string(scales) + " scales");

  static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += kWeights[s];

  double total = 0.0;
  const std::size_t npix = static_cast<std::size_t>(a->shape.h) * a->shape.w;
  for (int c = 0; c < a->shape.c; ++c) {
    detail::Plane pa{a->shape.h, a->shape.w,
                     {a->data.begin() + c * npix, a->data.begin() + (c + 1) * npix}};
    detail::Plane pb{b->shape.h, b->shape.w,
                     {b->data.begin() + c * npix, b->data.begin() + (c + 1) * npix}};
    double score = 1.0;
    for (int s = 0; s < scales; ++s) {
      auto [lum, cs] = detail::ssim_terms(pa, pb);
      const double w = kWeights[s] / wsum;
      if (s == scales - 1)
        score *= std::pow(std::max(lum * cs, 0.0), w);
      else
        score *= std::pow(std::max(cs, 0.0), w);
      if (s != scales - 1) {
        pa = detail::downsample2(pa);
        pb = detail::downsample2(pb);
      }
    }
    total += score;
  }
  return total / a->shape.c;
}

inline double ms_ssim_db(double v) {
  return -10.0 * std::log10(std::max(1.0 - v, 1e-12));
}

// Picks the largest feasible scale count (<=5) for the image size.
inline int ms_ssim_max_scales(int h, int w) {
  int scales = 0;
  while (scales < 5 && std::min(h, w) >= (11 << scales)) ++scales;
  return scales;
}

inline QualityReport complexity_report(const CodecConfig& config) {
  QualityReport q;
  q.param_total = param_count(config);
  q.mults_per_pixel = mult_count_per_pixel(config);
  return q;
}

}  // namespace ijscc
