#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "ijscc/errors.hpp"

namespace ijscc {

// Architecture and rate hyperparameters of one instance codec.
struct CodecConfig {
  int levels = 7;                               // L
  std::vector<int> level_channels = {1, 1, 1, 1, 1, 1, 1};  // {L_k}
  int hidden_dim = 12;                          // d
  int source_channels = 3;                      // C
  int kernel_size = 8;
  int kappa_lsm = 1;                            // LSM repetition factor
  int kappa_redu = 1;                           // ReDU repetition factor

  int sum_level_channels() const {
    return std::accumulate(level_channels.begin(), level_channels.end(), 0);
  }

  void validate() const {
    if (levels < 1) throw ConfigError("levels must be >= 1");
    if (static_cast<int>(level_channels.size()) != levels)
      throw ConfigError("level_channels length must equal levels");
    for (int lk : level_channels)
      if (lk < 1) throw ConfigError("every L_k must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (source_channels < 1) throw ConfigError("source_channels must be >= 1");
    if (kernel_size != 8) throw ConfigError("kernel_size is fixed at 8");
    if (kappa_lsm < 1 || kappa_redu < 1)
      throw ConfigError("repetition factors must be >= 1");
  }
};

// The (d, kappa_lsm) pairs searched in the reference configuration.
inline std::vector<std::pair<int, int>> default_search_set() {
  return {{12, 25}, {18, 17}, {24, 12}, {30, 9}, {36, 7}};
}

inline std::size_t redu_param_count() { return 64; }  // one shared 8x8 kernel, no bias

inline std::size_t lsm_param_count(const CodecConfig& c) {
  const std::size_t s = c.sum_level_channels();
  const std::size_t d = c.hidden_dim;
  const std::size_t ch = c.source_channels;
  return (2 * s * d + d)      // W1 + b1, fed by concat(U, M)
         + (d * d + d)        // W2 + b2
         + (d * ch + ch)      // W3 + b3
         + 2 * (9 * ch * ch + ch);  // two 3x3 convs + biases
}

inline std::size_t param_count(const CodecConfig& c) {
  c.validate();
  return redu_param_count() + lsm_param_count(c);
}

// Decoder multiplications per source pixel. Each stride-2 transposed-conv
// output pixel touches 16 of the 64 kernel taps; upsample call k outputs
// ch_k channels at a fraction of the final resolution. Nearest-neighbor
// expansion of the common randomness contributes zero multiplies.
inline double mult_count_per_pixel(const CodecConfig& c) {
  c.validate();
  double redu = 0.0;
  if (c.levels >= 2) {
    // Upsample of y_L: L_L channels at N/4^(L-2) output pixels, then one
    // upsample per k = L..3 with the running concatenated channel count.
    int ch = c.level_channels[c.levels - 1];
    double frac = std::pow(0.25, c.levels - 2);
    redu += 16.0 * ch * frac;
    for (int k = c.levels; k >= 3; --k) {
      ch += c.level_channels[k - 2];
      frac *= 4.0;
      redu += 16.0 * ch * frac;
    }
  }
  const double s = c.sum_level_channels();
  const double d = c.hidden_dim;
  const double ch = c.source_channels;
  const double lsm = 2.0 * s * d + d * d + d * ch + 2.0 * 9.0 * ch * ch;
  return redu + lsm;
}

}  // namespace ijscc
