// Acceptance gate: one line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "cpsl/bundle.hpp"
#include "cpsl/compositor.hpp"
#include "cpsl/distance.hpp"
#include "cpsl/errors.hpp"
#include "cpsl/geometry.hpp"
#include "cpsl/metrics.hpp"
#include "cpsl/parallel.hpp"
#include "cpsl/ratealloc.hpp"
#include "cpsl/render.hpp"
#include "cpsl/synth.hpp"
#include "cpsl/temporal.hpp"
#include "support.hpp"

using namespace cpsl;
using namespace cpsl::test;

namespace {

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

char buf[512];

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome homographyOracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const int w = 640, h = 480;
  double worst = 0.0;
  int triples = 0;
  while (triples < 20000) {
    const Camera src = randomCamera(rng, w, h, 0.05, 0.1);
    const Camera dst = randomCamera(rng, w, h, 0.35, 0.6);
    const double z = uniform(rng, 0.5, 30.0);
    PlaneHomography H;
    try {
      H = planeHomography(src, dst, z);
    } catch (const DegenerateCameraError&) {
      continue;
    }
    for (int i = 0; i < 10; ++i) {
      const Vec2 p(uniform(rng, 0, w - 1), uniform(rng, 0, h - 1));
      Reprojection r;
      try {
        r = reprojectPoint(src, dst, p, z);
      } catch (const BehindCameraError&) {
        continue;
      }
      if (std::abs(r.pixel.x()) > 1e5 || std::abs(r.pixel.y()) > 1e5) continue;
      worst = std::max(worst, (H.apply(r.pixel.x(), r.pixel.y()) - p).norm());
      ++triples;
    }
  }
  const double secs = secondsSince(t0);
  return {worst <= 1e-4 && secs < 5.0, fmt("%d triples, max error %.2e px, %.2f s", triples, worst, secs)};
}

Outcome compositingOracle() {
  Rng rng(202);
  double worstPremul = 0.0, worstStraight = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int K = uniformInt(rng, 1, 6);
    const auto stack = randomStack(rng, K, 8, 8);
    const CompositeOutput out = composite(stack);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        const auto ref = bruteForceComposite(stack, x, y, false);
        const auto straight = bruteForceComposite(stack, x, y, true);
        for (int c = 0; c < 3; ++c) {
          worstPremul = std::max(worstPremul, std::abs(out.color.at(x, y, c) - ref[c]));
          worstStraight = std::max(worstStraight, std::abs(straight[c] - ref[c]));
        }
        worstPremul = std::max(worstPremul, std::abs(out.coverage.at(x, y) - ref[3]));
        worstStraight = std::max(worstStraight, std::abs(straight[3] - ref[3]));
      }
    }
  }
  return {worstPremul <= 1e-6 && worstStraight <= 1e-6,
          fmt("100 stacks, composite vs oracle %.2e, straight vs premultiplied %.2e", worstPremul, worstStraight)};
}

Outcome energyExactness() {
  Rng rng(303);
  EnergyParams params;
  int draws = 0, exact2 = 0;
  double worstRatio3 = 0.0;
  int draws3 = 0;
  for (int h = 2; h <= 4; ++h) {
    for (int w = 2; w <= 4; ++w) {
      for (int i = 0; i < 30; ++i) {
        const FrameInputs in = randomInputs(rng, w, h);
        params.lambdaB = uniform(rng, 0.0, 2.0);
        const LayerModel m2 = randomModel(rng, 2);
        const double solved = solveAssignment(in, params, m2).energy;
        const double best = bruteForceEnergyMin(in, params, m2).energy;
        ++draws;
        if (std::abs(solved - best) <= 1e-9 * std::max(1.0, std::abs(best))) ++exact2;

        if (w * h <= 12 || i % 3 == 0) {
          const LayerModel m3 = randomModel(rng, 3);
          const double s3 = solveAssignment(in, params, m3).energy;
          const double b3 = bruteForceEnergyMin(in, params, m3).energy;
          worstRatio3 = std::max(worstRatio3, b3 > 0.0 ? s3 / b3 : (s3 <= 1e-12 ? 1.0 : 1e9));
          ++draws3;
        }
      }
    }
  }
  return {exact2 == draws && draws >= 200 && worstRatio3 <= 1.05,
          fmt("K=2: %d/%d optimal; K=3: worst ratio %.4f over %d draws", exact2, draws, worstRatio3, draws3)};
}

struct TwoPlaneFixture {
  SyntheticScene scene = SyntheticScene::twoPlane();
  GroundTruth gt = renderGroundTruth(scene, scene.camera);
  DecomposedFrame frame = decomposeFrame(gt.inputs(), scene.camera, 0, DecomposeParams{});
  double pivot = sceneMedianDepth(frame.layers);

  Camera yawed(double deg) const { return orbitPose(scene.camera, deg, 0.0, 0.0, pivot); }
};

Outcome endToEndParallax() {
  const auto t0 = Clock::now();
  const TwoPlaneFixture fx;
  const double angles[3] = {5.0, 10.0, 15.0};
  const double floors[3] = {35.0, 32.0, 30.0};
  double got[3];
  bool ok = true;
  for (int i = 0; i < 3; ++i) {
    const Camera viewer = fx.yawed(angles[i]);
    const RenderResult r = renderView(fx.frame.layers, fx.frame.edc, viewer);
    const ImageF img = compositeOverBackdrop(r.out, {0.0f, 0.0f, 0.0f});
    const GroundTruth truth = renderGroundTruth(fx.scene, viewer);
    Mask keep = disocclusionMask(fx.scene, fx.scene.camera, viewer);
    for (auto& v : keep.data()) v = !v;
    got[i] = psnr(img, truth.image, &keep);
    ok = ok && got[i] >= floors[i];
  }
  const double secs = secondsSince(t0);
  return {ok && secs < 30.0, fmt("%zu layers, PSNR 5/10/15 deg = %.2f/%.2f/%.2f dB, %.2f s",
                                 fx.frame.layers.size(), got[0], got[1], got[2], secs)};
}

Outcome dpsEfficacy() {
  const TwoPlaneFixture fx;
  const Camera viewer = fx.yawed(20.0);
  RenderParams off;
  off.dps = false;
  const RenderResult with = renderView(fx.frame.layers, fx.frame.edc, viewer);
  const RenderResult without = renderView(fx.frame.layers, fx.frame.edc, viewer, off);
  const Mask band = crackBand(with.warped);
  const double cWith = crackRate(with.out, band);
  const double cWithout = crackRate(without.out, band);

  // Zero offset: differences confined to the w_min band around silhouettes.
  const RenderResult still = renderView(fx.frame.layers, fx.frame.edc, fx.scene.camera);
  const RenderParams defaults;
  const int radius = static_cast<int>(std::ceil(defaults.dpsParams.wMin + 0.5));
  const Mask wminBand = silhouetteBand(still.silhouettes, still.out.width(), still.out.height(), radius);
  double outside = 0.0;
  for (int y = 0; y < still.out.height(); ++y) {
    for (int x = 0; x < still.out.width(); ++x) {
      if (wminBand.at(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        outside = std::max(outside, double(std::abs(still.out.color.at(x, y, c) - still.plain.color.at(x, y, c))));
      }
      outside = std::max(outside, double(std::abs(still.out.coverage.at(x, y) - still.plain.coverage.at(x, y))));
    }
  }
  const bool ok = cWithout > 0.0 && cWith <= 0.5 * cWithout && outside <= 1e-6;
  return {ok, fmt("20 deg crack rate %.4f with vs %.4f without (ratio %.3f); 0 deg change outside band %.2e", cWith,
                  cWithout, cWithout > 0 ? cWith / cWithout : 0.0, outside)};
}

Outcome temporalStability() {
  const SyntheticScene scene = SyntheticScene::twoPlane();
  const int frames = 12;
  const auto inputs = jitteredSequence(scene, frames, 2, 7);
  const DecomposeParams dp;
  const GopParams gp;
  const auto full = processSequence(inputs, {}, scene.camera, dp, gp, true);
  const auto base = processSequence(inputs, {}, scene.camera, dp, gp, false);

  auto alphaStacks = [](const std::vector<SequenceFrame>& seq) {
    std::vector<std::vector<PlaneF>> stacks;
    for (const auto& f : seq) {
      std::vector<PlaneF> s;
      for (const Layer& L : f.layers.layers) {
        PlaneF a(L.width(), L.height(), 1, 0.0f);
        for (std::size_t i = 0; i < a.pixelCount(); ++i) a.data()[i] = L.rgba.data()[i * 4 + 3];
        s.push_back(std::move(a));
      }
      stacks.push_back(std::move(s));
    }
    return stacks;
  };
  const double bv = boundaryVariance(alphaStacks(full), alphaStacks(base));

  // Flicker of a fixed novel view, measured around the true silhouette.
  const GroundTruth gt = renderGroundTruth(scene, scene.camera);
  const double pivot = 4.0;
  const Camera viewer = orbitPose(scene.camera, 10.0, 0.0, 0.0, pivot);
  const GroundTruth gtView = renderGroundTruth(scene, viewer);
  Mask edges(gtView.planeIndex.width(), gtView.planeIndex.height(), 1, 0);
  for (int y = 1; y < edges.height(); ++y) {
    for (int x = 1; x < edges.width(); ++x) {
      const int p = gtView.planeIndex.at(x, y);
      edges.at(x, y) = p != gtView.planeIndex.at(x - 1, y) || p != gtView.planeIndex.at(x, y - 1);
    }
  }
  const std::vector<Mask> band{dilate(edges, 6)};
  auto renders = [&](const std::vector<SequenceFrame>& seq) {
    std::vector<ImageF> out;
    for (const auto& f : seq) {
      out.push_back(compositeOverBackdrop(renderView(f.layers, f.edc, viewer).out, {0.0f, 0.0f, 0.0f}));
    }
    return out;
  };
  const double fFull = flickerScore(renders(full), band);
  const double fBase = flickerScore(renders(base), band);
  const double fl = fBase > 0.0 ? fFull / fBase : 0.0;
  (void)gt;
  return {bv <= 0.7 && fl <= 0.7 && fBase > 0.0,
          fmt("boundaryVariance %.3f, flickerScore %.3f (baseline 1.0; raw flicker %.5f vs %.5f)", bv, fl, fFull,
              fBase)};
}

// Water-filling optimum of sum w_k / (r_k + 1) subject to sum r_k = R, 0 <= r_k <= rMax.
std::vector<double> continuousOptimum(const std::vector<double>& w, double R, double rMax) {
  auto rate = [&](double wk, double lambda) { return std::clamp(std::sqrt(wk / lambda) - 1.0, 0.0, rMax); };
  auto total = [&](double lambda) {
    double s = 0.0;
    for (double wk : w) s += rate(wk, lambda);
    return s;
  };
  double lo = 1e-12, hi = 1e6;
  for (int i = 0; i < 300; ++i) {
    const double mid = std::sqrt(lo * hi);
    (total(mid) > R ? lo : hi) = mid;
  }
  std::vector<double> r;
  for (double wk : w) r.push_back(rate(wk, hi));
  return r;
}

Outcome rateAllocation() {
  Rng rng(404);
  int violations = 0, randomCount = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int K = uniformInt(rng, 1, 8);
    std::vector<RdCurve> curves;
    std::vector<double> weights;
    double minTotal = 0.0;
    for (int k = 0; k < K; ++k) {
      std::vector<RdPoint> pts;
      const int n = uniformInt(rng, 1, 8);
      for (int i = 0; i < n; ++i) pts.push_back({uniform(rng, 10, 1000), uniform(rng, 0, 1), i});
      curves.push_back(RdCurve::fromSamples(pts));
      weights.push_back(uniformInt(rng, 0, 4) == 0 ? 0.0 : uniform(rng, 0, 5));
      minTotal += curves.back().minRate();
    }
    const double budget = minTotal + uniform(rng, 0.0, 3000.0);
    const Allocation a = allocateRates(curves, weights, budget);
    ++randomCount;
    if (a.totalRate() > budget) ++violations;
  }

  const std::vector<double> w{0.5, 1.0, 2.0, 3.5, 0.2};
  const int maxRate = 200;
  std::vector<RdCurve> curves;
  for (std::size_t k = 0; k < w.size(); ++k) {
    std::vector<RdPoint> pts;
    for (int r = 0; r <= maxRate; ++r) pts.push_back({double(r), 1.0 / (r + 1.0), r});
    curves.push_back(RdCurve::fromSamples(pts));
  }
  double worstGap = 0.0;
  bool invariant = true;
  for (double R : {10.0, 37.0, 100.0, 250.0, 600.0}) {
    const Allocation a = allocateRates(curves, w, R);
    const auto opt = continuousOptimum(w, R, maxRate);
    for (std::size_t k = 0; k < w.size(); ++k) worstGap = std::max(worstGap, std::abs(a.rates[k] - opt[k]));
    std::vector<double> w3 = w;
    for (double& v : w3) v *= 3.0;
    const Allocation b = allocateRates(curves, w3, R);
    invariant = invariant && a.point == b.point && a.rates == b.rates;
  }
  return {violations == 0 && worstGap <= 1.0 && invariant,
          fmt("%d/%d random instances over budget; analytic max gap %.3f hull steps; 3w invariant: %s", violations,
              randomCount, worstGap, invariant ? "yes" : "no")};
}

Outcome bundleRoundTrip() {
  Rng rng(505);
  const int w = 48, h = 32;
  const Camera cam = Camera::make(40, 40, 23.5, 15.5);
  std::vector<BundleFrame> frames;
  for (int t = 0; t < 10; ++t) frames.push_back(randomBundleFrame(rng, 4, w, h, cam, t));
  const auto bytes = packBundle(frames);
  const bool equal = unpackBundle(bytes) == frames;

  auto codeOf = [](const std::vector<std::uint8_t>& b) -> int {
    try {
      unpackBundle(b);
      return 0;
    } catch (const TruncatedStreamError& e) {
      return 10 + e.exitCode();
    } catch (const VersionMismatchError& e) {
      return 20 + e.exitCode();
    } catch (const CorruptContainerError& e) {
      return 30 + e.exitCode();
    } catch (...) {
      return -1;
    }
  };
  bool designated = true;
  auto magic = bytes;
  magic[0] = 'X';
  designated = designated && codeOf(magic) == 34;
  auto version = bytes;
  version[4] = 9;
  designated = designated && codeOf(version) == 24;
  auto payload = bytes;
  payload[bytes.size() / 2] ^= 0x40;
  designated = designated && codeOf(payload) == 34;
  int truncOk = 0, truncN = 0;
  for (std::size_t n = 0; n < bytes.size(); n += std::max<std::size_t>(1, bytes.size() / 97)) {
    ++truncN;
    truncOk += codeOf(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + static_cast<long>(n))) == 14;
  }
  int fuzzOk = 0;
  const int fuzzN = 300;
  for (int i = 0; i < fuzzN; ++i) {
    auto b = bytes;
    b[static_cast<std::size_t>(uniformInt(rng, 0, static_cast<int>(b.size()) - 1))] ^=
        static_cast<std::uint8_t>(1u << uniformInt(rng, 0, 7));
    const int c = codeOf(b);
    fuzzOk += c > 0 && c % 10 == 4;
  }
  const bool ok = equal && designated && truncOk == truncN && fuzzOk == fuzzN;
  return {ok, fmt("10x4 lossless deep-equal: %s; designated codes: %s; truncations %d/%d; bit flips %d/%d",
                  equal ? "yes" : "no", designated ? "yes" : "no", truncOk, truncN, fuzzOk, fuzzN)};
}

struct BenchScene {
  LayerSet layers;
  EdgeDepthCache edc;
  Camera viewer;
};

BenchScene benchScene(int w, int h, int K) {
  const SyntheticScene scene = SyntheticScene::slabs(w, h, K - 1);
  const GroundTruth gt = renderGroundTruth(scene, scene.camera);
  BenchScene b;
  b.layers = groundTruthLayers(scene, gt);
  b.edc = buildEdgeDepthCache(b.layers, gt.depth, DzQuantizer(0.0, 8.0));
  b.viewer = orbitPose(scene.camera, 10.0, 3.0, 0.0, sceneMedianDepth(b.layers));
  return b;
}

// Median wall time of the fused renderer, output buffer reused.
double renderMs(const BenchScene& b, int repeat) {
  const FrameRenderer fr(b.layers, b.edc);
  CompositeOutput out;
  fr.render(b.viewer, {}, out);
  std::vector<double> times;
  for (int i = 0; i < repeat; ++i) {
    const auto t0 = Clock::now();
    fr.render(b.viewer, {}, out);
    times.push_back(secondsSince(t0) * 1e3);
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

double maxAbsDiff(const PlaneF& a, const PlaneF& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.storage().size(); ++i) {
    const float x = a.storage()[i], y = b.storage()[i];
    if (std::isinf(x) && std::isinf(y) && x == y) continue;
    m = std::max(m, static_cast<double>(std::abs(x - y)));
  }
  return m;
}

Outcome throughput() {
  const BenchScene hd = benchScene(1280, 720, 8);
  // The timed path must reproduce the reference pipeline.
  const CompositeOutput ref = renderView(hd.layers, hd.edc, hd.viewer).out;
  const CompositeOutput fused = FrameRenderer(hd.layers, hd.edc).render(hd.viewer);
  const double diff = std::max({maxAbsDiff(ref.color, fused.color), maxAbsDiff(ref.coverage, fused.coverage),
                                maxAbsDiff(ref.depthFront, fused.depthFront)});
  const double ms = renderMs(hd, 9);
  const double fps = 1000.0 / ms;
  const double k4 = renderMs(benchScene(640, 360, 4), 9);
  const double k8 = renderMs(benchScene(640, 360, 8), 9);
  const double px1 = renderMs(benchScene(640, 360, 6), 9);
  const double px2 = renderMs(benchScene(905, 509, 6), 9);  // 2x pixels
  const double kSlope = (k8 / k4) / 2.0;
  const double pxSlope = (px2 / px1) / (905.0 * 509.0 / (640.0 * 360.0));
  const bool ok = diff <= 1e-5 && fps >= 30.0 && kSlope <= 1.2 && pxSlope <= 1.2;
  return {ok, fmt("1280x720 K=8: %.1f ms (%.1f FPS, %d thread(s)); K 4->8 %.2fx linear; pixels 2x %.2fx linear; "
                  "max diff vs reference %.2g",
                  ms, fps, threadCount(), kSlope, pxSlope, diff)};
}

}  // namespace

// With arguments, runs only the named criteria.
int main(int argc, char** argv) {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"homography-oracle", homographyOracle},   {"compositing-oracle", compositingOracle},
      {"energy-exactness", energyExactness},     {"end-to-end-parallax", endToEndParallax},
      {"dps-efficacy", dpsEfficacy},             {"temporal-stability", temporalStability},
      {"rate-allocation", rateAllocation},       {"bundle-round-trip", bundleRoundTrip},
      {"throughput", throughput},
  };
  const std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %-20s %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no such criterion\n");
    return 2;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
