#include <catch_amalgamated.hpp>
#include <cmath>

#include "ijscc/metrics.hpp"
#include "test_util.hpp"

using namespace ijscc;
using testutil::synthetic_image;

TEST_CASE("psnr closed forms") {
  auto a = synthetic_image(3, 16, 16);
  CHECK(psnr(a, a) == 100.0);

  // force MSE = 0.01 and 0.001 by a constant offset
  for (auto [offset, expected] : {std::pair{0.1, 20.0}, {std::sqrt(0.001), 30.0}}) {
    auto b = Tensor::make(a->shape);
    for (std::size_t i = 0; i < a->data.size(); ++i)
      b->data[i] = a->data[i] + offset;
    CHECK(psnr(a, b) == Catch::Approx(expected).margin(1e-9));
  }

  CHECK_THROWS_AS(psnr(a, Tensor::make({3, 8, 8})), ShapeError);
}

TEST_CASE("psnr is translation consistent and noise monotone") {
  auto a = synthetic_image(1, 24, 24);
  auto b = Tensor::make(a->shape);
  RngStream rng(3);
  for (std::size_t i = 0; i < a->data.size(); ++i)
    b->data[i] = a->data[i] + 0.01 * rng.gaussian();

  auto shift = [](const Var& t, double c) {
    auto out = Tensor::make(t->shape);
    for (std::size_t i = 0; i < t->data.size(); ++i) out->data[i] = t->data[i] + c;
    return out;
  };
  CHECK(psnr(a, b) == Catch::Approx(psnr(shift(a, 0.01), shift(b, 0.01))).margin(1e-9));

  double prev = 1e9;
  for (double amp : {0.02, 0.05, 0.1}) {
    auto noisy = Tensor::make(a->shape);
    RngStream r2(5);
    for (std::size_t i = 0; i < a->data.size(); ++i)
      noisy->data[i] = a->data[i] + amp * r2.gaussian();
    const double p = psnr(a, noisy);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("ms-ssim identity, symmetry, and noise monotonicity") {
  auto a = synthetic_image(3, 64, 64);
  const int scales = ms_ssim_max_scales(64, 64);
  CHECK(scales == 3);
  CHECK(ms_ssim(a, a, scales) == Catch::Approx(1.0).margin(1e-12));

  auto noisy = [&](double amp, std::uint64_t seed) {
    auto out = Tensor::make(a->shape);
    RngStream rng(seed);
    for (std::size_t i = 0; i < a->data.size(); ++i)
      out->data[i] =
          std::clamp(a->data[i] + amp * (rng.uniform() - 0.5), 0.0, 1.0);
    return out;
  };
  auto b = noisy(0.2, 11);
  CHECK(ms_ssim(a, b, scales) == Catch::Approx(ms_ssim(b, a, scales)).margin(1e-12));

  const double strong = ms_ssim(a, noisy(0.5, 13), scales);
  const double weak = ms_ssim(a, noisy(0.1, 13), scales);
  CHECK(strong < weak);
  CHECK(weak < 1.0);
  CHECK(strong > 0.0);

  // too-small image names the minimum size
  auto tiny = synthetic_image(1, 16, 16);
  CHECK_THROWS_WITH(ms_ssim(tiny, tiny, 5),
                    Catch::Matchers::ContainsSubstring("176"));
}

TEST_CASE("ms-ssim dB conversion") {
  CHECK(ms_ssim_db(0.9) == Catch::Approx(10.0).margin(1e-9));
  CHECK(ms_ssim_db(0.99) == Catch::Approx(20.0).margin(1e-9));
}

TEST_CASE("complexity report delegates to the closed forms") {
  CodecConfig cfg;
  auto q = complexity_report(cfg);
  CHECK(q.param_total == 607);
  CHECK(q.mults_per_pixel > 621.0);
  CHECK(q.mults_per_pixel < 661.0);

  CodecConfig d36 = cfg;
  d36.hidden_dim = 36;
  CHECK(complexity_report(d36).param_total == 2215);
}
