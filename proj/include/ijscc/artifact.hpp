#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "ijscc/channel.hpp"
#include "ijscc/codec_config.hpp"
#include "ijscc/errors.hpp"

namespace ijscc {

// The on-air codec for one source instance: the power-normalized channel
// symbols plus the repetition-encoded (normalized) parameter stream, with
// everything the receiver needs to regenerate common randomness and undo
// the coding. Little-endian 64-bit payloads, bit-exact round trip.
struct TransmissionArtifact {
  static constexpr std::array<char, 4> kMagic = {'I', 'J', 'S', 'C'};
  static constexpr std::uint16_t kVersion = 1;

  CodecConfig config;
  std::uint32_t height = 0, width = 0;            // original source dims
  std::uint32_t padded_height = 0, padded_width = 0;
  double snr_db = 0.0;
  std::uint64_t common_seed = 0;
  RepetitionPlan plan;                            // gains are side information
  std::vector<double> symbols;                    // normalized pyramid, level order
  std::vector<double> param_stream;               // repetition-encoded parameters

  bool operator==(const TransmissionArtifact& o) const {
    return config.levels == o.config.levels &&
           config.level_channels == o.config.level_channels &&
           config.hidden_dim == o.config.hidden_dim &&
           config.source_channels == o.config.source_channels &&
           config.kappa_lsm == o.config.kappa_lsm &&
           config.kappa_redu == o.config.kappa_redu &&
           height == o.height && width == o.width &&
           padded_height == o.padded_height && padded_width == o.padded_width &&
           snr_db == o.snr_db && common_seed == o.common_seed &&
           plan.kappa_lsm == o.plan.kappa_lsm &&
           plan.kappa_redu == o.plan.kappa_redu &&
           plan.gain_redu == o.plan.gain_redu &&
           plan.gain_lsm == o.plan.gain_lsm &&
           symbols == o.symbols && param_stream == o.param_stream;
  }
};

namespace detail {

template <typename T>
void put(std::vector<std::uint8_t>& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  // Host is little-endian on every supported target; bytes go out as-is.
  buf.insert(buf.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > size_)
      throw ParseError("artifact truncated at byte " + std::to_string(pos_));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::vector<double> get_doubles(std::size_t n) {
    if (n > (size_ - pos_) / sizeof(double))
      throw ParseError("artifact payload truncated");
    std::vector<double> out(n);
    std::memcpy(out.data(), data_ + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return out;
  }

  std::size_t remaining() const { return size_ - pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_artifact(const TransmissionArtifact& a) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), TransmissionArtifact::kMagic.begin(),
             TransmissionArtifact::kMagic.end());
  detail::put<std::uint16_t>(buf, TransmissionArtifact::kVersion);
  detail::put<std::uint32_t>(buf, a.config.levels);
  for (int lk : a.config.level_channels) detail::put<std::uint32_t>(buf, lk);
  detail::put<std::uint32_t>(buf, a.config.hidden_dim);
  detail::put<std::uint32_t>(buf, a.config.source_channels);
  detail::put<std::uint32_t>(buf, a.config.kernel_size);
  detail::put<std::uint32_t>(buf, a.config.kappa_lsm);
  detail::put<std::uint32_t>(buf, a.config.kappa_redu);
  detail::put<std::uint32_t>(buf, a.height);
  detail::put<std::uint32_t>(buf, a.width);
  detail::put<std::uint32_t>(buf, a.padded_height);
  detail::put<std::uint32_t>(buf, a.padded_width);
  detail::put<double>(buf, a.snr_db);
  detail::put<std::uint64_t>(buf, a.common_seed);
  detail::put<double>(buf, a.plan.gain_redu);
  detail::put<double>(buf, a.plan.gain_lsm);
  detail::put<std::uint64_t>(buf, a.symbols.size());
  for (double v : a.symbols) detail::put<double>(buf, v);
  detail::put<std::uint64_t>(buf, a.param_stream.size());
  for (double v : a.param_stream) detail::put<double>(buf, v);
  return buf;
}

inline TransmissionArtifact deserialize_artifact(const std::vector<std::uint8_t>& bytes) {
  detail::Reader r(bytes.data(), bytes.size());
  for (char c : TransmissionArtifact::kMagic)
    if (r.get<char>() != c) throw ParseError("bad artifact magic, expected IJSC");
  const auto version = r.get<std::uint16_t>();
  if (version != TransmissionArtifact::kVersion)
    throw ParseError("unsupported artifact version " + std::to_string(version));

  TransmissionArtifact a;
  a.config.levels = static_cast<int>(r.get<std::uint32_t>());
  if (a.config.levels < 1 || a.config.levels > 16)
    throw ParseError("artifact declares implausible level count");
  a.config.level_channels.clear();
  for (int k = 0; k < a.config.levels; ++k)
    a.config.level_channels.push_back(static_cast<int>(r.get<std::uint32_t>()));
  a.config.hidden_dim = static_cast<int>(r.get<std::uint32_t>());
  a.config.source_channels = static_cast<int>(r.get<std::uint32_t>());
  a.config.kernel_size = static_cast<int>(r.get<std::uint32_t>());
  a.config.kappa_lsm = static_cast<int>(r.get<std::uint32_t>());
  a.config.kappa_redu = static_cast<int>(r.get<std::uint32_t>());
  a.plan.kappa_lsm = a.config.kappa_lsm;
  a.plan.kappa_redu = a.config.kappa_redu;
  a.height = r.get<std::uint32_t>();
  a.width = r.get<std::uint32_t>();
  a.padded_height = r.get<std::uint32_t>();
  a.padded_width = r.get<std::uint32_t>();
  a.snr_db = r.get<double>();
  a.common_seed = r.get<std::uint64_t>();
  a.plan.gain_redu = r.get<double>();
  a.plan.gain_lsm = r.get<double>();
  a.symbols = r.get_doubles(r.get<std::uint64_t>());
  a.param_stream = r.get_doubles(r.get<std::uint64_t>());
  if (r.remaining() != 0) throw ParseError("trailing bytes after artifact payload");
  a.config.validate();
  return a;
}

inline void write_artifact_file(const std::string& path,
                                const TransmissionArtifact& a) {
  auto bytes = serialize_artifact(a);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

inline TransmissionArtifact read_artifact_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open artifact file " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return deserialize_artifact(bytes);
}

}  // namespace ijscc
