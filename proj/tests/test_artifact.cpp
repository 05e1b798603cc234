#include <catch_amalgamated.hpp>
#include <filesystem>

#include "ijscc/artifact.hpp"
#include "ijscc/optimizer.hpp"
#include "test_util.hpp"

using namespace ijscc;

namespace {

TransmissionArtifact sample_artifact() {
  CodecConfig cfg;
  cfg.levels = 2;
  cfg.level_channels = {1, 1};
  cfg.hidden_dim = 4;
  cfg.source_channels = 1;
  cfg.kappa_lsm = 3;
  cfg.kappa_redu = 2;

  RngStream rng(77);
  auto x = init_latents(cfg, 8, 8, rng);
  auto theta = DecoderParams::init(cfg, rng);
  return make_artifact(x, theta, cfg, ChannelSpec::from_snr(10.0), 7, 8, 8, 8, 41);
}

}  // namespace

TEST_CASE("artifact serialize/deserialize is bit-exact") {
  auto a = sample_artifact();
  auto bytes = serialize_artifact(a);
  auto b = deserialize_artifact(bytes);
  CHECK(a == b);
  CHECK(serialize_artifact(b) == bytes);

  // header starts with magic + version
  CHECK(bytes[0] == 'I');
  CHECK(bytes[1] == 'J');
  CHECK(bytes[2] == 'S');
  CHECK(bytes[3] == 'C');
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
}

TEST_CASE("artifact parser rejects corruption distinctly") {
  auto a = sample_artifact();
  auto bytes = serialize_artifact(a);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH(deserialize_artifact(bad_magic),
                    Catch::Matchers::ContainsSubstring("magic"));

  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_WITH(deserialize_artifact(bad_version),
                    Catch::Matchers::ContainsSubstring("version"));

  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() / 2,
                          bytes.size() - 1}) {
    auto truncated = bytes;
    truncated.resize(cut);
    CHECK_THROWS_AS(deserialize_artifact(truncated), ParseError);
  }

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize_artifact(trailing), ParseError);
}

TEST_CASE("artifact file round trip") {
  auto a = sample_artifact();
  const auto path = std::filesystem::temp_directory_path() / "ijscc_test.ijsc";
  write_artifact_file(path.string(), a);
  auto b = read_artifact_file(path.string());
  CHECK(a == b);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(read_artifact_file("/nonexistent/nope.ijsc"), ParseError);
}

TEST_CASE("artifact payload lengths match rate accounting") {
  auto a = sample_artifact();
  const std::size_t n = 8 * 8;
  auto rb = rate_budget(a.config, n);
  CHECK(channel_uses(a.symbols.size()) == rb.channel_uses_x);
  CHECK(channel_uses(a.param_stream.size()) == rb.channel_uses_theta);
  CHECK(a.param_stream.size() ==
        a.config.kappa_redu * redu_param_count() +
            a.config.kappa_lsm * lsm_param_count(a.config));
}
