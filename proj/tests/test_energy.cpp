#include <doctest.h>

#include "cpsl/errors.hpp"
#include "support.hpp"

using namespace cpsl;

namespace {

// Flat gray row with the given depths; no saliency, one class, no instances.
FrameInputs row(const std::vector<float>& depths) {
  const int w = static_cast<int>(depths.size());
  FrameInputs in;
  in.image = ImageF(w, 1, 3, 0.5f);
  PlaneF d(w, 1, 1, 0.0f);
  for (int x = 0; x < w; ++x) d.at(x, 0) = depths[static_cast<std::size_t>(x)];
  in.depth = DepthMap::make(std::move(d), Mask(w, 1, 1, 1), PlaneF(w, 1, 1, 1.0f));
  in.semantics = SemanticMaps::make(PlaneF(w, 1, 1, 0.0f), PlaneI(w, 1, 1, 0), PlaneI(w, 1, 1, 0),
                                    PlaneF(w, 1, 1, 0.0f));
  return in;
}

LayerModel model(std::vector<double> depths) {
  LayerModel m;
  m.majorityClass.assign(depths.size(), 0);
  m.depth = std::move(depths);
  return m;
}

}  // namespace

TEST_SUITE("energy") {
  TEST_CASE("robust penalty is quadratic inside delta and linear outside") {
    CHECK(robustPenalty(0.0, 0.5) == 0.0);
    CHECK(robustPenalty(0.25, 0.5) == doctest::Approx(0.0625));
    CHECK(robustPenalty(-0.5, 0.5) == doctest::Approx(0.25));
    CHECK(robustPenalty(2.0, 0.5) == doctest::Approx(1.75));
    CHECK(robustPenalty(-2.0, 0.5) == doctest::Approx(1.75));
    // continuous slope at the knee
    const double e = 1e-6;
    CHECK((robustPenalty(0.5 + e, 0.5) - robustPenalty(0.5 - e, 0.5)) / (2 * e) == doctest::Approx(1.0).epsilon(1e-4));
  }

  TEST_CASE("two-pixel energy by hand") {
    const FrameInputs in = row({1.0f, 3.0f});
    EnergyParams p;
    p.huberDelta = 0.5;
    p.lambdaB = 0.5;
    const LayerModel m = model({1.0, 3.0});
    PlaneI split(2, 1, 1, 0);
    split.at(1, 0) = 1;
    CHECK(evaluateEnergy(split, m, in, p) == doctest::Approx(0.5));
    CHECK(evaluateEnergy(PlaneI(2, 1, 1, 0), m, in, p) == doctest::Approx(1.75));

    auto r = solveAssignment(in, p, m);
    CHECK(r.energy == doctest::Approx(0.5));
    CHECK(r.labels.at(0, 0) != r.labels.at(1, 0));

    p.lambdaB = 3.0;  // the cut now costs more than the depth misfit
    r = solveAssignment(in, p, m);
    CHECK(r.energy == doctest::Approx(1.75));
    CHECK(r.labels.at(0, 0) == r.labels.at(1, 0));
  }

  TEST_CASE("semantic and instance penalties") {
    FrameInputs in = row({2.0f});
    in.semantics = SemanticMaps::make(PlaneF(1, 1, 1, 1.0f), PlaneI(1, 1, 1, 7), PlaneI(1, 1, 1, 4),
                                      PlaneF(1, 1, 1, 0.0f));
    EnergyParams p;
    p.huberDelta = 1.0;
    LayerModel m = model({2.0});
    CHECK(evaluateEnergy(PlaneI(1, 1, 1, 0), m, in, p) == doctest::Approx(p.kappaSem + p.kappaInst));
    m.majorityClass[0] = 7;
    m.instanceOwner[4] = 0;
    CHECK(evaluateEnergy(PlaneI(1, 1, 1, 0), m, in, p) == doctest::Approx(0.0));
  }

  TEST_CASE("quantile initialization splits ranks evenly") {
    const FrameInputs in = row({8, 1, 5, 2, 7, 3, 6, 4});
    std::vector<double> bins;
    const PlaneI l = quantileInitialization(in, 4, &bins);
    for (int x = 0; x < 8; ++x) CHECK(l.at(x, 0) == (static_cast<int>(in.depth.values.at(x, 0)) - 1) / 2);
    REQUIRE(bins.size() == 4);
    for (std::size_t k = 1; k < bins.size(); ++k) CHECK(bins[k] > bins[k - 1]);
  }

  TEST_CASE("fixed two-label solve is optimal") {
    test::Rng rng(5);
    EnergyParams p;
    for (int i = 0; i < 40; ++i) {
      const FrameInputs in = test::randomInputs(rng, test::uniformInt(rng, 2, 4), test::uniformInt(rng, 2, 3));
      p.lambdaB = test::uniform(rng, 0.0, 2.0);
      const LayerModel m = test::randomModel(rng, 2);
      const double best = bruteForceEnergyMin(in, p, m).energy;
      CHECK(solveAssignment(in, p, m).energy == doctest::Approx(best).epsilon(1e-9));
    }
  }

  TEST_CASE("free solve never beats the exhaustive minimum and sorts depths") {
    test::Rng rng(8);
    EnergyParams p;
    p.K = 2;
    for (int i = 0; i < 10; ++i) {
      const FrameInputs in = test::randomInputs(rng, 3, 2);
      const auto r = solveAssignment(in, p);
      const double best = bruteForceEnergyMin(in, p).energy;
      CHECK(r.energy >= best - 1e-9);
      for (std::size_t k = 1; k < r.representativeDepths.size(); ++k) {
        CHECK(r.representativeDepths[k] > r.representativeDepths[k - 1]);
      }
    }
  }

  TEST_CASE("errors") {
    FrameInputs in = row({1.0f, 2.0f});
    in.depth = DepthMap::make(PlaneF(2, 1, 1, 1.0f), Mask(2, 1, 1, 0), PlaneF(2, 1, 1, 1.0f));
    CHECK_THROWS_AS(solveAssignment(in, EnergyParams{}), NoValidDepthError);
    EnergyParams bad;
    bad.lambdaB = -1;
    CHECK_THROWS_AS(bad.validate(), InvariantError);
  }
}
