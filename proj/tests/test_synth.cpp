#include <doctest.h>

#include "cpsl/geometry.hpp"
#include "cpsl/synth.hpp"
#include "support.hpp"

using namespace cpsl;

TEST_SUITE("synth") {
  TEST_CASE("splitmix64 reference values") {
    std::uint64_t s = 0;
    CHECK(splitmix64(s) == 0xE220A8397B1DCDAFull);
    CHECK(splitmix64(s) == 0x6E789E6AA1B965F4ull);
  }

  TEST_CASE("two-plane ground truth") {
    const auto scene = SyntheticScene::twoPlane(64, 48);
    const auto a = renderGroundTruth(scene, scene.camera);
    const auto b = renderGroundTruth(scene, scene.camera);
    CHECK(a.image.storage() == b.image.storage());
    int card = 0;
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 64; ++x) {
        REQUIRE(a.depth.valid.at(x, y));
        const float z = a.depth.values.at(x, y);
        CHECK((z == doctest::Approx(3.2) || z == doctest::Approx(4.0)));
        if (z < 3.5f) ++card;
      }
    }
    CHECK(card > 0);
    CHECK(card < 64 * 48);
  }

  TEST_CASE("disocclusion") {
    const auto scene = SyntheticScene::twoPlane(64, 48);
    const Mask none = disocclusionMask(scene, scene.camera, scene.camera);
    for (auto v : none.storage()) CHECK(v == 0);
    const Mask some = disocclusionMask(scene, scene.camera, orbitPose(scene.camera, 10.0, 0.0, 0.2, 3.6));
    int n = 0;
    for (auto v : some.storage()) n += v;
    CHECK(n > 0);
  }

  TEST_CASE("slabs and sequences") {
    const auto scene = SyntheticScene::slabs(48, 32, 4);
    CHECK(scene.planes.size() == 5);
    const auto seq = renderSequence(SyntheticScene::twoPlane(32, 24), 3);
    CHECK(seq.size() == 3);
    const auto j1 = jitteredSequence(SyntheticScene::twoPlane(32, 24), 3, 2, 7);
    const auto j2 = jitteredSequence(SyntheticScene::twoPlane(32, 24), 3, 2, 7);
    REQUIRE(j1.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) CHECK(j1[t].depth.values.storage() == j2[t].depth.values.storage());
  }

  TEST_CASE("brute-force composite of a single opaque layer") {
    std::vector<Layer> s(1);
    s[0].rgba = ImageF(1, 1, 4, 0.0f);
    s[0].rgba.at(0, 0, 0) = 0.7f;
    s[0].rgba.at(0, 0, 3) = 1.0f;
    const auto r = bruteForceComposite(s, 0, 0);
    CHECK(r[0] == doctest::Approx(0.7));
    CHECK(r[3] == doctest::Approx(1.0));
  }
}
