#include <doctest.h>

#include "cpsl/geometry.hpp"
#include "cpsl/render.hpp"
#include "support.hpp"

using namespace cpsl;

TEST_SUITE("render") {
  TEST_CASE("frame renderer matches the reference path") {
    test::Rng rng(77);
    for (int trial = 0; trial < 12; ++trial) {
      const int w = test::uniformInt(rng, 20, 70), h = test::uniformInt(rng, 16, 50);
      const int K = test::uniformInt(rng, 1, 5);
      const Camera src = test::randomCamera(rng, w, h, 0.0, 0.0);
      BundleFrame f = test::randomBundleFrame(rng, std::max(K, 2), w, h, src, 0);
      // blocky alpha so that there are contours and holes
      for (auto& L : f.layers.layers) {
        const int bx = test::uniformInt(rng, 0, w / 2), by = test::uniformInt(rng, 0, h / 2);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            if (x < bx || y < by) std::fill_n(L.rgba.pixel(x, y), 4, 0.0f);
      }
      const FrameRenderer fr(f.layers, f.edc);
      for (int pose = 0; pose < 3; ++pose) {
        const Camera viewer = orbitPose(src, test::uniform(rng, -15.0, 15.0), test::uniform(rng, -5.0, 5.0),
                                        test::uniform(rng, 0.0, 0.4), sceneMedianDepth(f.layers));
        for (Filter filter : {Filter::Bilinear, Filter::Nearest}) {
          for (bool dps : {false, true}) {
            RenderParams p;
            p.filter = filter;
            p.dps = dps;
            const auto ref = renderView(f.layers, f.edc, viewer, p).out;
            const auto got = fr.render(viewer, p);
            CHECK(got.color.storage() == ref.color.storage());
            CHECK(got.coverage.storage() == ref.coverage.storage());
            CHECK(got.depthFront.storage() == ref.depthFront.storage());
          }
        }
      }
    }
  }

  TEST_CASE("dps off leaves the plain composite") {
    test::Rng rng(3);
    const Camera src = test::randomCamera(rng, 24, 18, 0.0, 0.0);
    const BundleFrame f = test::randomBundleFrame(rng, 3, 24, 18, src, 0);
    RenderParams p;
    p.dps = false;
    const auto r = renderView(f.layers, f.edc, orbitPose(src, 6.0, 0.0, 0.1, 2.0), p);
    CHECK(r.out.color.storage() == r.plain.color.storage());
    CHECK(r.silhouettes.empty());
  }

  TEST_CASE("scene median depth weights opaque area") {
    std::vector<Layer> layers(2);
    layers[0].depth = 1.0;
    layers[1].depth = 5.0;
    layers[0].rgba = ImageF(10, 10, 4, 0.0f);
    layers[1].rgba = ImageF(10, 10, 4, 1.0f);
    for (int x = 0; x < 3; ++x) std::fill_n(layers[0].rgba.pixel(x, 0), 4, 1.0f);
    const LayerSet ls = makeLayerSet(std::move(layers), 0, Camera::make(10, 10, 4.5, 4.5));
    CHECK(sceneMedianDepth(ls) == doctest::Approx(5.0));
  }
}
