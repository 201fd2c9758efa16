#include <doctest.h>

#include <limits>

#include "cpsl/compositor.hpp"
#include "cpsl/errors.hpp"
#include "support.hpp"

using namespace cpsl;

namespace {

Layer solid(int w, int h, double depth, float r, float g, float b, float a) {
  Layer L;
  L.rgba = ImageF(w, h, 4, 0.0f);
  L.depth = depth;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float* p = L.rgba.pixel(x, y);
      p[0] = r * a;
      p[1] = g * a;
      p[2] = b * a;
      p[3] = a;
    }
  }
  return L;
}

}  // namespace

TEST_SUITE("compositor") {
  TEST_CASE("two-layer over by hand") {
    const std::vector<Layer> s = {solid(2, 2, 1.0, 0.8f, 0.0f, 0.0f, 0.5f), solid(2, 2, 2.0, 0.0f, 0.6f, 0.0f, 1.0f)};
    const CompositeOutput o = composite(s);
    CHECK(o.color.at(1, 1, 0) == doctest::Approx(0.4));
    CHECK(o.color.at(1, 1, 1) == doctest::Approx(0.3));
    CHECK(o.color.at(1, 1, 2) == doctest::Approx(0.0));
    CHECK(o.coverage.at(1, 1) == doctest::Approx(1.0));
    CHECK(o.depthFront.at(1, 1) == 2.0f);  // 0.5 is not above the visibility threshold
  }

  TEST_CASE("empty pixels have zero coverage and infinite depth") {
    const std::vector<Layer> s = {solid(3, 2, 1.0, 1, 1, 1, 0.0f)};
    const CompositeOutput o = composite(s);
    CHECK(o.coverage.at(0, 0) == 0.0f);
    CHECK(o.depthFront.at(2, 1) == std::numeric_limits<float>::infinity());
  }

  TEST_CASE("matches the per-pixel oracle") {
    test::Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const int K = test::uniformInt(rng, 1, 6);
      const auto s = test::randomStack(rng, K, 5, 4);
      const CompositeOutput o = composite(s);
      for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 5; ++x) {
          const auto ref = bruteForceComposite(s, x, y);
          for (int c = 0; c < 3; ++c) CHECK(o.color.at(x, y, c) == doctest::Approx(ref[static_cast<std::size_t>(c)]).epsilon(1e-5));
          CHECK(o.coverage.at(x, y) == doctest::Approx(ref[3]).epsilon(1e-5));
        }
      }
    }
  }

  TEST_CASE("coverage never decreases when a layer is added behind") {
    test::Rng rng(22);
    auto s = test::randomStack(rng, 3, 6, 6);
    const CompositeOutput a = composite(std::span<const Layer>(s.data(), 2));
    const CompositeOutput b = composite(s);
    for (std::size_t i = 0; i < a.coverage.pixelCount(); ++i) {
      CHECK(b.coverage.data()[i] >= a.coverage.data()[i] - 1e-6f);
    }
  }

  TEST_CASE("opaque front layer hides everything behind") {
    test::Rng rng(23);
    auto s = test::randomStack(rng, 3, 4, 4);
    s.insert(s.begin(), solid(4, 4, 0.1, 0.2f, 0.3f, 0.4f, 1.0f));
    const CompositeOutput o = composite(s);
    CHECK(o.color.at(2, 2, 0) == doctest::Approx(0.2));
    CHECK(o.color.at(2, 2, 2) == doctest::Approx(0.4));
    CHECK(o.depthFront.at(2, 2) == doctest::Approx(0.1));
  }

  TEST_CASE("backdrop fills the uncovered share") {
    const std::vector<Layer> s = {solid(1, 1, 1.0, 1.0f, 0.0f, 0.0f, 0.25f)};
    const ImageF img = compositeOverBackdrop(composite(s), {0.0f, 0.0f, 1.0f});
    CHECK(img.at(0, 0, 0) == doctest::Approx(0.25));
    CHECK(img.at(0, 0, 2) == doctest::Approx(0.75));
  }

  TEST_CASE("invalid stacks are rejected") {
    CHECK_THROWS_AS(composite(std::span<const Layer>()), InvariantError);
    std::vector<Layer> s = {solid(2, 2, 2.0, 1, 1, 1, 1), solid(2, 2, 1.0, 1, 1, 1, 1)};
    CHECK_THROWS_AS(composite(s), InvariantError);
    s = {solid(2, 2, 1.0, 1, 1, 1, 1), solid(3, 2, 2.0, 1, 1, 1, 1)};
    CHECK_THROWS_AS(composite(s), InvariantError);
  }
}
