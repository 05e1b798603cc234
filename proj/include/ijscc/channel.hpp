#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "ijscc/codec_config.hpp"
#include "ijscc/errors.hpp"
#include "ijscc/rng.hpp"

namespace ijscc {

// mu = 10*log10(1/sigma_w^2); +inf is the noiseless sentinel.
inline double snr_to_sigma(double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return std::pow(10.0, -snr_db / 10.0);
}

struct ChannelSpec {
  double snr_db = 10.0;
  double sigma_w_sq = 0.1;  // noise variance per complex symbol
  std::uint64_t seed = 0;

  static ChannelSpec from_snr(double snr_db, std::uint64_t seed = 0) {
    return {snr_db, snr_to_sigma(snr_db), seed};
  }
  bool noiseless() const { return sigma_w_sq == 0.0; }
};

// One channel use carries one complex symbol, i.e. two reals. Odd-length
// streams zero-pad the final symbol.
inline std::size_t channel_uses(std::size_t num_reals) {
  return (num_reals + 1) / 2;
}

// Y = X + W with W[i] ~ CN(0, sigma_w^2): each real component picks up
// independent N(0, sigma_w^2 / 2) noise. Deterministic for a given stream.
inline std::vector<double> awgn_transmit(const std::vector<double>& reals,
                                         const ChannelSpec& spec,
                                         RngStream& rng) {
  if (reals.size() % 2 != 0)
    throw ShapeError("awgn_transmit: real stream must pack into complex symbols");
  std::vector<double> out = reals;
  if (spec.noiseless()) return out;
  const double stddev = std::sqrt(spec.sigma_w_sq / 2.0);
  for (auto& v : out) v += stddev * rng.gaussian();
  return out;
}

// Pads to an even length, transmits, drops the pad.
inline std::vector<double> awgn_transmit_padded(std::vector<double> reals,
                                                const ChannelSpec& spec,
                                                RngStream& rng) {
  const std::size_t n = reals.size();
  if (n % 2 != 0) reals.push_back(0.0);
  auto out = awgn_transmit(reals, spec, rng);
  out.resize(n);
  return out;
}

struct RateBudget {
  double r_x = 0.0;
  double r_theta = 0.0;
  double r_total = 0.0;
  std::size_t channel_uses_x = 0;
  std::size_t channel_uses_theta = 0;
};

// R_x = sum_k L_k / (2C 4^{k-1});  R_theta = (kl*|LSM| + kr*|ReDU|) / (2NC).
inline RateBudget rate_budget(const CodecConfig& config, std::size_t source_pixels) {
  config.validate();
  const std::size_t n = source_pixels;
  const std::size_t div = std::size_t{1} << (2 * (config.levels - 1));  // 4^(L-1)
  if (n % div != 0)
    throw ConfigError("rate_budget: pixel count not divisible by 4^(L-1); pad the source");

  RateBudget rb;
  std::size_t symbol_reals = 0;
  double pow4 = 1.0;
  for (int k = 0; k < config.levels; ++k) {
    rb.r_x += config.level_channels[k] / (2.0 * config.source_channels * pow4);
    symbol_reals += config.level_channels[k] * (n >> (2 * k));
    pow4 *= 4.0;
  }
  const std::size_t rep_reals =
      static_cast<std::size_t>(config.kappa_lsm) * lsm_param_count(config) +
      static_cast<std::size_t>(config.kappa_redu) * redu_param_count();
  rb.r_theta = static_cast<double>(rep_reals) /
               (2.0 * static_cast<double>(n) * config.source_channels);
  rb.r_total = rb.r_x + rb.r_theta;
  rb.channel_uses_x = channel_uses(symbol_reals);
  rb.channel_uses_theta = channel_uses(rep_reals);
  return rb;
}

struct RepetitionPlan {
  int kappa_lsm = 1;
  int kappa_redu = 1;
  // Power-normalization scalars, genie side information at the receiver.
  double gain_redu = 1.0;
  double gain_lsm = 1.0;
};

namespace detail {

// g = sqrt(2 * mean(x^2)) so that x/g has unit average complex power.
inline double group_gain(const double* x, std::size_t n) {
  double sumsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) sumsq += x[i] * x[i];
  if (sumsq == 0.0) throw ShapeError("repetition group is all-zero");
  return std::sqrt(2.0 * sumsq / static_cast<double>(n));
}

inline void repeat_group(const double* x, std::size_t n, double gain, int kappa,
                         std::vector<double>& out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i] / gain;
    for (int r = 0; r < kappa; ++r) out.push_back(v);
  }
}

}  // namespace detail

// params = [ReDU kernel | LSM parameters]; each group is normalized by its
// own gain, then every value is repeated kappa (group) times consecutively.
// The computed gains are written back into the plan.
inline std::vector<double> repetition_encode(const std::vector<double>& params,
                                             std::size_t redu_count,
                                             RepetitionPlan& plan) {
  if (params.empty()) throw ShapeError("repetition_encode: empty parameter vector");
  if (plan.kappa_lsm < 1 || plan.kappa_redu < 1)
    throw ConfigError("repetition factors must be >= 1");
  if (redu_count > params.size())
    throw ShapeError("repetition_encode: bad group boundary");
  const std::size_t lsm_count = params.size() - redu_count;

  std::vector<double> out;
  out.reserve(redu_count * plan.kappa_redu + lsm_count * plan.kappa_lsm);
  if (redu_count > 0) {
    plan.gain_redu = detail::group_gain(params.data(), redu_count);
    detail::repeat_group(params.data(), redu_count, plan.gain_redu,
                         plan.kappa_redu, out);
  }
  if (lsm_count > 0) {
    plan.gain_lsm = detail::group_gain(params.data() + redu_count, lsm_count);
    detail::repeat_group(params.data() + redu_count, lsm_count, plan.gain_lsm,
                         plan.kappa_lsm, out);
  }
  return out;
}

// Averages each kappa-block and scales back by the group gain. Effective
// per-parameter noise variance is (sigma_w^2/2) * gain^2 / kappa.
inline std::vector<double> repetition_decode(const std::vector<double>& noisy,
                                             std::size_t redu_count,
                                             std::size_t lsm_count,
                                             const RepetitionPlan& plan) {
  const std::size_t expect = redu_count * plan.kappa_redu + lsm_count * plan.kappa_lsm;
  if (noisy.size() != expect)
    throw ShapeError("repetition_decode: stream length inconsistent with plan");
  std::vector<double> out;
  out.reserve(redu_count + lsm_count);
  std::size_t pos = 0;
  auto decode_group = [&](std::size_t n, int kappa, double gain) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int r = 0; r < kappa; ++r) acc += noisy[pos++];
      out.push_back(acc / kappa * gain);
    }
  };
  decode_group(redu_count, plan.kappa_redu, plan.gain_redu);
  decode_group(lsm_count, plan.kappa_lsm, plan.gain_lsm);
  return out;
}

}  // namespace ijscc
