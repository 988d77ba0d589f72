#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "common/oracles.hpp"
#include "phantomqa/augment.hpp"
#include "phantomqa/errors.hpp"
#include "phantomqa/rng.hpp"

using namespace phantomqa;

namespace {

TensorU8 random_image(const std::vector<int>& shape, RngState& rng) {
  TensorU8 img(shape);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.next_below(256));
  return img;
}

}  // namespace

TEST_CASE("flips are exact involutions and compose to a half turn") {
  RngState rng(41);
  for (int W : {8, 9}) {  // even and odd widths both mirror exactly
    auto img = random_image({2, 7, W}, rng);
    CHECK(hflip(hflip(img)).data == img.data);
    CHECK(vflip(vflip(img)).data == img.data);

    auto fl = vflip(hflip(img));
    auto half_turn = rotate(img, 180.0);
    CHECK(fl.data == half_turn.data);

    // hflip really mirrors columns.
    auto h = hflip(img);
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < W; ++x) {
        CHECK(h.at(0, y, x) == img.at(0, y, W - 1 - x));
      }
    }
  }
}

TEST_CASE("quarter-turn rotation moves a marker to the expected quadrant") {
  // Convention: destination p reads source R(-theta)(p - c) + c, so a
  // marker right of center lands below center after a +90 degree turn.
  TensorU8 img = TensorU8::zeros({65, 65});
  img.at(32, 42) = 255;  // (x, y) = (center + 10, center)
  auto r = rotate(img, 90.0);
  int by = -1, bx = -1, best = -1;
  for (int y = 0; y < 65; ++y)
    for (int x = 0; x < 65; ++x)
      if (r.at(y, x) > best) {
        best = r.at(y, x);
        by = y;
        bx = x;
      }
  CHECK(best >= 200);
  CHECK(std::abs(bx - 32) <= 1);
  CHECK(std::abs(by - 42) <= 1);
}

TEST_CASE("scaling moves a marker radially") {
  TensorU8 img = TensorU8::zeros({65, 65});
  // A 3x3 block so bilinear sampling keeps a bright core.
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) img.at(32 + dy, 52 + dx) = 255;
  auto bigger = scale(img, 1.25);  // dest c + 25 reads source c + 20
  int best = -1, bx = -1;
  for (int x = 0; x < 65; ++x)
    if (bigger.at(32, x) > best) {
      best = bigger.at(32, x);
      bx = x;
    }
  CHECK(best >= 128);
  CHECK(std::abs(bx - 57) <= 1);
  CHECK_THROWS_AS(scale(img, 0.0), std::invalid_argument);
}

TEST_CASE("integer translation is an exact copy with zero fill") {
  RngState rng(42);
  auto img = random_image({9, 9}, rng);
  auto t = translate(img, 3.0, -2.0);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 9; ++x) {
      const int sx = x - 3, sy = y + 2;
      const std::uint8_t want =
          (sx >= 0 && sx < 9 && sy >= 0 && sy < 9) ? img.at(sy, sx) : 0;
      CHECK(t.at(y, x) == want);
    }
  }
}

TEST_CASE("brightness shifts by whole rounded levels and clamps") {
  TensorU8 img({1, 4}, {0, 100, 200, 255});
  auto up = brightness(img, 1.0);
  CHECK(up[0] == 1);
  CHECK(up[1] == 101);
  CHECK(up[3] == 255);  // clamped
  auto down = brightness(img, -1.0);
  CHECK(down[0] == 0);  // clamped
  CHECK(down[2] == 199);
  CHECK(brightness(img, 0.4).data == img.data);  // rounds to zero
  CHECK(brightness(img, 0.5)[1] == 101);         // half rounds away
}

TEST_CASE("motion blur: hand fixture, constancy, range") {
  TensorU8 line({1, 3}, {0, 255, 0});
  auto b = motion_blur(line, 3, 0.0);
  CHECK(b[0] == 85);
  CHECK(b[1] == 85);
  CHECK(b[2] == 85);

  auto flat = TensorU8::full({6, 6}, 77);
  for (double ang : {0.0, 45.0, 90.0, 135.0}) {
    CHECK(motion_blur(flat, 5, ang).data == flat.data);
  }

  RngState rng(43);
  auto img = random_image({8, 8}, rng);
  std::uint8_t lo = 255, hi = 0;
  for (auto v : img.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  auto blurred = motion_blur(img, 7, 30.0);
  for (auto v : blurred.data) {
    CHECK(v >= lo);
    CHECK(v <= hi);
  }
  CHECK_THROWS_AS(motion_blur(img, 4, 0.0), std::invalid_argument);
}

TEST_CASE("disabled augmentation is the identity") {
  RngState rng(44);
  auto img = random_image({3, 16, 16}, rng);
  AugmentConfig cfg;
  cfg.enabled = false;
  CHECK(apply_augment(img, cfg, RngState(1)).data == img.data);
}

TEST_CASE("augmentation is deterministic in the stream state") {
  RngState rng(45);
  auto img = random_image({3, 16, 16}, rng);
  AugmentConfig cfg;
  auto a = apply_augment(img, cfg, RngState(7));
  auto b = apply_augment(img, cfg, RngState(7));
  CHECK(a.data == b.data);
  auto c = apply_augment(img, cfg, RngState(8));
  CHECK(a.data != c.data);
}

TEST_CASE("inactive effects still consume their magnitude draws") {
  AugmentConfig always;
  AugmentConfig never = always;
  for (auto* p : {&never.p_hflip, &never.p_vflip, &never.p_rotate, &never.p_scale,
                  &never.p_translate_h, &never.p_translate_v, &never.p_brightness,
                  &never.p_blur}) {
    *p = 0.0;
  }
  for (auto* p : {&always.p_hflip, &always.p_vflip, &always.p_rotate, &always.p_scale,
                  &always.p_translate_h, &always.p_translate_v, &always.p_brightness,
                  &always.p_blur}) {
    *p = 1.0;
  }
  RngState r1(9), r2(9);
  auto pa = draw_augment_params(always, 64, r1);
  auto pn = draw_augment_params(never, 64, r2);
  CHECK(r1.pos() == r2.pos());
  CHECK(pa.angle_deg == pn.angle_deg);
  CHECK(pa.scale_factor == pn.scale_factor);
  CHECK(pa.tx_px == pn.tx_px);
  CHECK(pa.ty_px == pn.ty_px);
  CHECK(pa.delta_levels == pn.delta_levels);
  CHECK(pa.blur_len == pn.blur_len);
  CHECK(pa.blur_angle_deg == pn.blur_angle_deg);
  CHECK(pa.hflip);
  CHECK_FALSE(pn.hflip);
}

TEST_CASE("all channels of a stack share one transform") {
  RngState rng(46);
  TensorU8 img({3, 12, 12});
  auto one = random_image({12, 12}, rng);
  for (int c = 0; c < 3; ++c) {
    std::copy(one.data.begin(), one.data.end(), img.data.begin() + c * 144);
  }
  AugmentConfig cfg;
  auto out = apply_augment(img, cfg, RngState(3));
  for (int c = 1; c < 3; ++c) {
    for (int i = 0; i < 144; ++i) {
      CHECK(out.data[static_cast<std::size_t>(c * 144 + i)] == out.data[static_cast<std::size_t>(i)]);
    }
  }
}

TEST_CASE("config validation rejects bad ranges") {
  AugmentConfig cfg;
  cfg.p_rotate = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.scale_lo = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.blur_kernels = {4};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.blur_kernels.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("one hundred random parameter draws match the reference resampler") {
  RngState rng(47);
  AugmentConfig cfg;  // every effect at p=0.5
  int geometric_cases = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const bool multi = rep % 2 == 0;
    auto img = multi ? random_image({2, 16, 16}, rng) : random_image({16, 16}, rng);
    RngState draw = rng.substream(static_cast<std::uint64_t>(rep + 1));
    auto params = draw_augment_params(cfg, 16, draw);
    geometric_cases += (params.rotate || params.scale) ? 1 : 0;
    auto got = apply_augment_params(img, params);
    auto want = testoracle::augment_reference(img, params);
    REQUIRE(got.shape == want.shape);
    CHECK(got.data == want.data);
  }
  CHECK(geometric_cases > 20);  // the sweep actually exercised the affine path
}
