#include <doctest.h>

#include <algorithm>

#include "cpsl/errors.hpp"
#include "support.hpp"

using namespace cpsl;

namespace {

DepthMap flatDepth(int w, int h, float z, float stability) {
  return DepthMap::make(PlaneF(w, h, 1, z), Mask(w, h, 1, 1), PlaneF(w, h, 1, stability));
}

Mask leftHalf(int w, int h) {
  Mask m(w, h, 1, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w / 2; ++x) m.at(x, y) = 1;
  return m;
}

int partialCount(const PlaneF& a) {
  return static_cast<int>(std::count_if(a.storage().begin(), a.storage().end(),
                                        [](float v) { return v > 0.0f && v < 1.0f; }));
}

}  // namespace

TEST_SUITE("layergen") {
  TEST_CASE("instance scores") {
    PlaneI inst(4, 2, 1, 0);
    PlaneF sal(4, 2, 1, 0.0f);
    for (int x = 0; x < 4; ++x) {
      inst.at(x, 0) = 1;
      sal.at(x, 0) = 1.0f;
    }
    inst.at(0, 1) = inst.at(1, 1) = 2;
    sal.at(0, 1) = sal.at(1, 1) = 0.5f;
    const auto s = instanceScores(SemanticMaps::make(sal, PlaneI(4, 2, 1, 0), inst, PlaneF(4, 2, 1, 0.0f)));
    REQUIRE(s.size() == 2);
    for (const auto& [id, v] : s) CHECK(v == doctest::Approx(id == 1 ? 1.0 : 0.25));
  }

  TEST_CASE("feather width follows stability and clamps") {
    MatteParams p;
    const Mask m = leftHalf(20, 4);
    CHECK(featherWidth(m, flatDepth(20, 4, 2.0f, 1.0f), p).at(3, 2) == doctest::Approx(1.0));
    CHECK(featherWidth(m, flatDepth(20, 4, 2.0f, 0.0f), p).at(3, 2) == doctest::Approx(3.0));
    p.b = 100.0;
    CHECK(featherWidth(m, flatDepth(20, 4, 2.0f, 0.0f), p).at(3, 2) == doctest::Approx(p.wMax));
    p.wMin = 5;
    p.wMax = 2;
    CHECK_THROWS_AS(p.validate(), InvariantError);
  }

  TEST_CASE("feather matte is a monotone ramp across the contour") {
    MatteParams p;
    const Mask m = leftHalf(40, 3);
    const PlaneF sharp = featherMatte(m, flatDepth(40, 3, 2.0f, 1.0f), p);
    const PlaneF soft = featherMatte(m, flatDepth(40, 3, 2.0f, 0.0f), p);
    for (int x = 1; x < 40; ++x) {
      CHECK(sharp.at(x, 1) <= sharp.at(x - 1, 1));
      CHECK(soft.at(x, 1) <= soft.at(x - 1, 1));
    }
    CHECK(sharp.at(0, 1) == 1.0f);
    CHECK(sharp.at(39, 1) == 0.0f);
    CHECK(partialCount(soft) > partialCount(sharp));
  }

  TEST_CASE("budget") {
    const auto scene = SyntheticScene::twoPlane(96, 72);
    const auto gt = renderGroundTruth(scene, scene.camera);
    const FrameInputs in = gt.inputs();
    EnergyParams e;
    e.K = 4;
    const auto assign = solveAssignment(in, e);
    CHECK_THROWS_AS(promoteAndMerge(assign, in, PromotionParams{}, 1), BudgetInfeasibleError);
    for (int budget = 2; budget <= 4; ++budget) {
      const auto g = promoteAndMerge(assign, in, PromotionParams{}, budget);
      CHECK(g.groupCount() <= budget);
      for (int k = 1; k < g.groupCount(); ++k) CHECK(g.info[k].depth > g.info[k - 1].depth);
      CHECK(std::any_of(g.info.begin(), g.info.end(), [](const LayerGroup& l) { return l.promoted; }));
    }
  }

  TEST_CASE("two-plane decomposition") {
    const auto scene = SyntheticScene::twoPlane(128, 96);
    const auto gt = renderGroundTruth(scene, scene.camera);
    DecomposeParams p;
    p.layerBudget = 2;
    const auto f = decomposeFrame(gt.inputs(), scene.camera, 0, p);
    CHECK(validateLayerSet(f.layers).empty());
    CHECK(validateEdgeDepthCache(f.edc, f.layers).empty());
    REQUIRE(f.layers.size() == 2);
    CHECK(f.layers.layers[0].depth == doctest::Approx(3.2).epsilon(0.02));
    CHECK(f.layers.layers[1].depth == doctest::Approx(4.0).epsilon(0.02));
    CHECK_FALSE(f.edc.empty());
    for (const auto& s : f.edc.samples) {
      CHECK(s.frontLayer == 0);
      CHECK(s.backLayer == 1);
      // card-to-background gap of 0.8
      CHECK(f.edc.quantizer.dequantize(s.dzQuant) == doctest::Approx(0.8).epsilon(0.1));
    }
  }

  TEST_CASE("fallback saliency is bounded") {
    test::Rng rng(2);
    const auto in = test::randomInputs(rng, 16, 12);
    const PlaneF s = fallbackSaliency(in.image);
    for (float v : s.storage()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}
