#include <doctest.h>

#include "cpsl/core.hpp"
#include "cpsl/errors.hpp"
#include "support.hpp"

using namespace cpsl;

TEST_SUITE("core") {
  TEST_CASE("intrinsics and inverse agree") {
    const Camera c = Camera::make(500.0, 480.0, 320.0, 240.0);
    const Mat3 I = c.intrinsics() * c.intrinsicsInverse();
    CHECK((I - Mat3::Identity()).norm() < 1e-12);
    CHECK(c.intrinsics()(0, 0) == 500.0);
    CHECK(c.intrinsics()(1, 2) == 240.0);
  }

  TEST_CASE("camera center inverts the pose") {
    test::Rng rng(3);
    const Camera c = test::randomCamera(rng, 64, 48, 0.5, 2.0);
    const Vec3 p = c.rotation() * c.center() + c.translation();
    CHECK(p.norm() < 1e-12);
  }

  TEST_CASE("valid layer set passes validation") {
    test::Rng rng(1);
    const LayerSet ls = makeLayerSet(test::randomStack(rng, 3, 8, 6), 0, Camera::make(8, 8, 4, 3));
    CHECK(validateLayerSet(ls).empty());
  }

  TEST_CASE("layer set violations are reported") {
    test::Rng rng(2);
    auto layers = test::randomStack(rng, 3, 8, 6);
    SUBCASE("unsorted depths") {
      std::swap(layers[0].depth, layers[2].depth);
      CHECK_THROWS_AS(makeLayerSet(layers, 0, Camera()), InvariantError);
    }
    SUBCASE("alpha out of range") {
      layers[1].rgba.at(2, 2, 3) = 1.5f;
      CHECK_THROWS_AS(makeLayerSet(layers, 0, Camera()), InvariantError);
    }
    SUBCASE("color above alpha") {
      layers[1].rgba.at(2, 2, 3) = 0.2f;
      layers[1].rgba.at(2, 2, 0) = 0.9f;
      CHECK_THROWS_AS(makeLayerSet(layers, 0, Camera()), InvariantError);
    }
    SUBCASE("size mismatch") {
      layers[1].rgba = ImageF(5, 5, 4, 0.0f);
      CHECK_THROWS_AS(makeLayerSet(layers, 0, Camera()), InvariantError);
    }
    SUBCASE("too many layers") {
      CHECK_THROWS_AS(makeLayerSet(layers, 0, Camera(), 2), InvariantError);
    }
  }

  TEST_CASE("depth-gap quantizer is monotone and bounded") {
    const DzQuantizer q(0.0, 8.0);
    int prev = -1;
    for (double dz = 0.0; dz <= 8.0; dz += 0.01) {
      const int code = q.quantize(dz);
      CHECK(code >= prev);
      prev = code;
      // Rounding in the companded domain: within half the larger adjacent gap.
      const auto c = static_cast<std::uint8_t>(code);
      const double lo = c > 0 ? q.dequantize(c) - q.dequantize(static_cast<std::uint8_t>(c - 1)) : 0.0;
      const double hi = c < 255 ? q.dequantize(static_cast<std::uint8_t>(c + 1)) - q.dequantize(c) : 0.0;
      CHECK(std::abs(q.dequantize(c) - dz) <= 0.5 * std::max(lo, hi) + 1e-9);
    }
    CHECK(q.quantize(-1.0) == 0);
    CHECK(q.quantize(100.0) == 255);
    CHECK(q.dequantize(0) == doctest::Approx(0.0));
    CHECK(q.dequantize(255) == doctest::Approx(8.0));
  }

  TEST_CASE("mu-law code for a known gap") {
    // log1p(255 / 8) / log1p(255) * 255 = 160.6
    CHECK(DzQuantizer(0.0, 8.0).quantize(1.0) == 161);
  }

  TEST_CASE("quantizer steps grow with the gap") {
    const DzQuantizer q(0.0, 16.0);
    CHECK(q.stepAt(0.1) < q.stepAt(1.0));
    CHECK(q.stepAt(1.0) < q.stepAt(10.0));
  }

  TEST_CASE("invalid quantizer range is rejected") {
    CHECK_THROWS_AS(DzQuantizer(2.0, 1.0), InvariantError);
  }

  TEST_CASE("edge depth cache validation") {
    test::Rng rng(4);
    const BundleFrame f = test::randomBundleFrame(rng, 3, 10, 8, Camera::make(10, 10, 5, 4), 0);
    CHECK(validateEdgeDepthCache(f.edc, f.layers).empty());
    EdgeDepthCache bad = f.edc;
    bad.samples.push_back({50, 1, 0, 1, 3});
    CHECK_FALSE(validateEdgeDepthCache(bad, f.layers).empty());
    bad = f.edc;
    bad.samples.push_back({1, 1, 2, 1, 3});
    CHECK_FALSE(validateEdgeDepthCache(bad, f.layers).empty());
  }
}
