#include <cstdlib>

#include "doctest.h"
#include "irispad/augment.hpp"
#include "irispad/error.hpp"
#include "test_support.hpp"

using namespace irispad;
using namespace irispad::augment;
using irispad::test::random_image;

TEST_CASE("sample_plan is a function of (config, index)") {
  AugmentConfig cfg;
  cfg.seed = 1234;
  for (std::uint64_t i = 0; i < 20; ++i) {
    CHECK(sample_plan(cfg, i) == sample_plan(cfg, i));
    CHECK(describe(sample_plan(cfg, i)) == describe(sample_plan(cfg, i)));
  }
}

TEST_CASE("disabled transforms give an empty plan") {
  const auto cfg = identity_config(42);
  for (std::uint64_t i = 0; i < 10; ++i) CHECK(sample_plan(cfg, i).steps.empty());
}

TEST_CASE("adjacent seeds give different plans") {
  AugmentConfig a;
  a.seed = 77;
  AugmentConfig b = a;
  b.seed = 78;
  int differing = 0;
  for (std::uint64_t i = 0; i < 100; ++i) differing += sample_plan(a, i) == sample_plan(b, i) ? 0 : 1;
  CHECK(differing > 0);
  // with continuous parameters every plan should differ
  CHECK(differing == 100);
}

TEST_CASE("identity plans leave the image unchanged") {
  const auto img = random_image(48, 40, 3);
  CHECK(apply(img, AugmentPlan{}) == img);
  CHECK(apply(img, AugmentPlan{{GaussianNoise{0.0, 99}}}) == img);
  CHECK(apply(img, AugmentPlan{{GaussianBlur{0.0}}}) == img);
  CHECK(apply(img, AugmentPlan{{Contrast{1.0}}}) == img);
  CHECK(apply(img, AugmentPlan{{CropPad{0, 0, 0, 0}}}) == img);
  CHECK(apply(img, AugmentPlan{{Affine{0.0, 0.0, 1.0}}}) == img);
  CHECK(apply(img, AugmentPlan{{Rotate{0.0}}}) == img);
}

TEST_CASE("a full turn is identity up to interpolation error") {
  const auto img = random_image(64, 64, 9);
  for (double deg : {360.0, -360.0, 720.0}) {
    const auto out = apply(img, AugmentPlan{{Rotate{deg}}});
    int worst = 0;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) worst = std::max(worst, std::abs(out.at(x, y) - img.at(x, y)));
    }
    CHECK(worst <= 1);
  }
}

TEST_CASE("every sampled plan preserves dimensions and is reproducible") {
  AugmentConfig cfg;
  cfg.seed = 5;
  cfg.edge_enhance_probability = 0.5;
  const auto img = random_image(37, 53, 17);
  for (std::uint64_t i = 0; i < 60; ++i) {
    const auto plan = sample_plan(cfg, i);
    const auto out = apply(img, plan);
    CHECK(out.width() == img.width());
    CHECK(out.height() == img.height());
    CHECK(apply(img, plan) == out);
  }
}

TEST_CASE("coarse dropout touches only its rectangles") {
  const auto img = random_image(50, 40, 23, 10, 250);
  CoarseDropout drop{{{0.25, 0.25, 0.2, 0.3}, {0.8, 0.7, 0.1, 0.1}}, 0};
  const auto out = apply(img, AugmentPlan{{drop}});
  auto inside = [&](int x, int y) {
    for (const auto& r : drop.rects) {
      const int x0 = static_cast<int>(std::lround((r.cx - r.w / 2) * 50));
      const int x1 = static_cast<int>(std::lround((r.cx + r.w / 2) * 50));
      const int y0 = static_cast<int>(std::lround((r.cy - r.h / 2) * 40));
      const int y1 = static_cast<int>(std::lround((r.cy + r.h / 2) * 40));
      if (x >= x0 && x < x1 && y >= y0 && y < y1) return true;
    }
    return false;
  };
  int filled = 0;
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 50; ++x) {
      if (inside(x, y)) {
        CHECK(out.at(x, y) == 0);
        ++filled;
      } else {
        CHECK(out.at(x, y) == img.at(x, y));
      }
    }
  }
  CHECK(filled > 0);

  AugmentConfig cfg = identity_config(3);
  cfg.dropout = true;
  cfg.dropout_count = {0, 4};
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto plan = sample_plan(cfg, i);
    REQUIRE(plan.steps.size() == 1);
    CHECK(std::get<CoarseDropout>(plan.steps[0]).rects.size() <= 4);
  }
}

TEST_CASE("config text round-trips") {
  AugmentConfig cfg;
  cfg.seed = 987654321;
  cfg.rotation_degrees = {-7.25, 11.0 / 3.0};
  cfg.noise = false;
  cfg.crop_pad_pixels = {-3, 5};
  cfg.edge_enhance_probability = 0.125;
  CHECK(parse_config(format_config(cfg)) == cfg);
  CHECK(parse_config("# defaults\n\n") == AugmentConfig{});
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(parse_config("rotation.degrees = 10, -10\n"), Error);
  CHECK_THROWS_AS(parse_config("noise.sigma = -1, 2\n"), Error);
  CHECK_THROWS_AS(parse_config("edge_enhance.probability = 1.5\n"), Error);
  CHECK_THROWS_AS(parse_config("hue.enabled = true\n"), Error);
  CHECK_THROWS_AS(parse_config("rotation.enabled = maybe\n"), Error);
  CHECK_THROWS_AS(parse_config("just a line\n"), Error);

  AugmentConfig bad;
  bad.scale = {0.0, 1.0};
  CHECK_THROWS_AS(sample_plan(bad, 0), Error);
}
