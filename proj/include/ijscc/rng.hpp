#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace ijscc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Purpose tags keep every noise source on its own stream so that training
// noise, evaluation noise, common randomness, and initialization never alias.
enum class StreamTag : std::uint64_t {
  latent_init = 1,
  param_init = 2,
  channel_noise_train = 3,
  param_noise_train = 4,
  channel_noise_eval = 5,
  param_noise_eval = 6,
  common_randomness = 7,
  sweep_row = 8,
};

inline std::uint64_t derive_key(std::initializer_list<std::uint64_t> fields) {
  std::uint64_t k = 0x8e12f6d3a95b7c41ULL;
  for (auto f : fields) k = splitmix64(k ^ f);
  return k;
}

inline std::uint64_t derive_key(std::uint64_t seed, StreamTag tag,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
  return derive_key({seed, static_cast<std::uint64_t>(tag), a, b});
}

// Counter-based generator: output i depends only on (key, i), so streams are
// replayable from any offset and independent streams never share state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one variate per two draws (no cached spare, so the stream
  // position stays a pure function of the number of calls).
  double gaussian() {
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::vector<double> gaussians(std::size_t n, double stddev = 1.0) {
    std::vector<double> out(n);
    for (auto& v : out) v = stddev * gaussian();
    return out;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace ijscc
