#include "cpsl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpsl/errors.hpp"
#include "cpsl/parallel.hpp"

namespace cpsl {
namespace {

constexpr double kPi = 3.14159265358979323846;

double latticeValue(std::int64_t ix, std::int64_t iy, std::uint32_t seed) {
  std::uint64_t s = (static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ull) ^
                    (static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4Full) ^ (std::uint64_t(seed) << 32);
  return static_cast<double>(splitmix64(s) >> 11) * (1.0 / 9007199254740992.0);
}

double valueNoise(double u, double v, std::uint32_t seed) {
  const double fu = std::floor(u), fv = std::floor(v);
  const auto ix = static_cast<std::int64_t>(fu), iy = static_cast<std::int64_t>(fv);
  double tx = u - fu, ty = v - fv;
  tx = tx * tx * (3.0 - 2.0 * tx);
  ty = ty * ty * (3.0 - 2.0 * ty);
  const double a = latticeValue(ix, iy, seed), b = latticeValue(ix + 1, iy, seed);
  const double c = latticeValue(ix, iy + 1, seed), d = latticeValue(ix + 1, iy + 1, seed);
  return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
}

struct Hit {
  int plane = -1;
  double depth = std::numeric_limits<double>::infinity();
  Vec3 point;
};

// Nearest plane hit by the ray through `pixel` of `cam`.
Hit castRay(const std::vector<TexturedPlane>& planes, const Camera& cam, double px, double py) {
  const Vec3 dCam = cam.intrinsicsInverse() * Vec3(px, py, 1.0);
  const Vec3 dir = cam.rotation().transpose() * dCam;
  const Vec3 origin = cam.center();
  Hit best;
  if (std::abs(dir.z()) < 1e-15) return best;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const TexturedPlane& p = planes[i];
    const double s = (p.depth - origin.z()) / dir.z();
    if (!(s > 0.0)) continue;
    const Vec3 X = origin + s * dir;
    if (X.x() < p.x0 || X.x() >= p.x1 || X.y() < p.y0 || X.y() >= p.y1) continue;
    // dCam has unit z, so s is the camera-space depth.
    if (s < best.depth) best = {static_cast<int>(i), s, X};
  }
  return best;
}

bool occludedFrom(const std::vector<TexturedPlane>& planes, const Camera& cam, const Vec3& X, int plane) {
  const Vec3 o = cam.center();
  const Vec3 d = X - o;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (static_cast<int>(i) == plane) continue;
    const TexturedPlane& p = planes[i];
    if (std::abs(d.z()) < 1e-15) continue;
    const double s = (p.depth - o.z()) / d.z();
    if (!(s > 0.0 && s < 1.0)) continue;
    const Vec3 Y = o + s * d;
    if (Y.x() >= p.x0 && Y.x() < p.x1 && Y.y() >= p.y0 && Y.y() < p.y1) return true;
  }
  return false;
}

std::vector<TexturedPlane> planesAt(const SyntheticScene& scene, int frame) {
  std::vector<TexturedPlane> out;
  for (std::size_t i = 0; i < scene.planes.size(); ++i) out.push_back(scene.planeAt(i, frame));
  return out;
}

GroundTruth renderPlanes(const SyntheticScene& scene, const std::vector<TexturedPlane>& planes,
                         const Camera& cam) {
  const int w = scene.width, h = scene.height;
  GroundTruth gt;
  gt.image = ImageF(w, h, 3, 0.0f);
  PlaneF depth(w, h, 1, 0.0f);
  Mask valid(w, h, 1, 0);
  PlaneF sal(w, h, 1, 0.0f), edge(w, h, 1, 0.0f);
  PlaneI label(w, h, 1, 0), inst(w, h, 1, 0);
  gt.planeIndex = PlaneI(w, h, 1, -1);
  parallelFor(0, h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const Hit hit = castRay(planes, cam, x, y);
        if (hit.plane < 0) continue;
        const TexturedPlane& p = planes[static_cast<std::size_t>(hit.plane)];
        const auto c = planeTexture(p, hit.point.x() - p.x0, hit.point.y() - p.y0);
        for (int k = 0; k < 3; ++k) gt.image.at(x, y, k) = c[static_cast<std::size_t>(k)];
        depth.at(x, y) = static_cast<float>(hit.depth);
        valid.at(x, y) = 1;
        sal.at(x, y) = p.saliency;
        label.at(x, y) = p.label;
        inst.at(x, y) = p.instanceId;
        gt.planeIndex.at(x, y) = hit.plane;
      }
    }
  }, 8);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = gt.planeIndex.at(x, y);
      const bool e = (x > 0 && gt.planeIndex.at(x - 1, y) != id) || (x + 1 < w && gt.planeIndex.at(x + 1, y) != id) ||
                     (y > 0 && gt.planeIndex.at(x, y - 1) != id) || (y + 1 < h && gt.planeIndex.at(x, y + 1) != id);
      edge.at(x, y) = e ? 1.0f : 0.0f;
    }
  }
  gt.depth = DepthMap::make(std::move(depth), std::move(valid), PlaneF(w, h, 1, 1.0f));
  gt.semantics = SemanticMaps::make(std::move(sal), std::move(label), std::move(inst), std::move(edge));
  return gt;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

TexturedPlane SyntheticScene::planeAt(std::size_t i, int frame) const {
  TexturedPlane p = planes.at(i);
  const double dx = p.velocity.x() * frame, dy = p.velocity.y() * frame;
  p.x0 += dx;
  p.x1 += dx;
  p.y0 += dy;
  p.y1 += dy;
  return p;
}

SyntheticScene SyntheticScene::twoPlane(int width, int height) {
  SyntheticScene s;
  s.width = width;
  s.height = height;
  const double f = 240.0 * width / 256.0;
  s.camera = Camera::make(f, f, 0.5 * (width - 1), 0.5 * (height - 1));
  TexturedPlane bg;
  bg.depth = 4.0;
  bg.x0 = bg.y0 = -40.0;
  bg.x1 = bg.y1 = 40.0;
  bg.label = 0;
  bg.saliency = 0.1f;
  bg.base = {0.35f, 0.45f, 0.55f};
  bg.seed = 11;
  bg.noiseScale = 0.5;
  TexturedPlane fg;
  fg.depth = 3.2;
  fg.x0 = -0.55;
  fg.x1 = 0.5;
  fg.y0 = -0.4;
  fg.y1 = 0.45;
  fg.instanceId = 1;
  fg.label = 1;
  fg.saliency = 0.8f;
  fg.base = {0.8f, 0.5f, 0.3f};
  fg.seed = 23;
  fg.noiseScale = 0.3;
  s.planes = {bg, fg};
  return s;
}

SyntheticScene SyntheticScene::slabs(int width, int height, int count) {
  SyntheticScene s = twoPlane(width, height);
  s.planes.resize(1);
  s.planes[0].depth = 2.0 + 0.5 * count;
  for (int i = 0; i < count; ++i) {
    TexturedPlane p;
    p.depth = 2.0 + 0.5 * i;
    // Vertical bands, each partly covering the next.
    const double zx = p.depth / s.camera.fx();
    const double left = (-0.5 * width + (i + 0.5) * width / (count + 1.0)) * zx;
    p.x0 = left;
    p.x1 = left + 1.4 * width / (count + 1.0) * zx;
    p.y0 = -0.35 * height * zx;
    p.y1 = 0.35 * height * zx;
    p.instanceId = i + 1;
    p.label = i + 1;
    p.saliency = 0.5f;
    p.base = {0.3f + 0.5f * static_cast<float>(i % 3) / 2.0f, 0.6f, 0.7f - 0.4f * static_cast<float>(i) / count};
    p.seed = 100 + static_cast<std::uint32_t>(i);
    p.noiseScale = 0.3;
    s.planes.push_back(p);
  }
  return s;
}

std::array<float, 3> planeTexture(const TexturedPlane& p, double u, double v) {
  const double s = p.noiseScale;
  const double n1 = valueNoise(u / s, v / s, p.seed);
  const double n2 = valueNoise(2.0 * u / s, 2.0 * v / s, p.seed ^ 0x5bd1e995u);
  const double stripe = std::sin(2.0 * kPi * u / (3.0 * s));
  std::array<float, 3> c{};
  const double tint[3] = {1.0, 0.8, 0.6};
  for (int k = 0; k < 3; ++k) {
    const double val = p.base[static_cast<std::size_t>(k)] + 0.25 * (n1 - 0.5) * tint[k] + 0.1 * (n2 - 0.5) +
                       0.05 * stripe;
    c[static_cast<std::size_t>(k)] = static_cast<float>(std::clamp(val, 0.0, 1.0));
  }
  return c;
}

GroundTruth renderGroundTruth(const SyntheticScene& scene, const Camera& cam, int frame) {
  return renderPlanes(scene, planesAt(scene, frame), cam);
}

Mask disocclusionMask(const SyntheticScene& scene, const Camera& src, const Camera& dst, int frame) {
  const auto planes = planesAt(scene, frame);
  const int w = scene.width, h = scene.height;
  Mask m(w, h, 1, 0);
  parallelFor(0, h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const Hit hit = castRay(planes, dst, x, y);
        if (hit.plane < 0) {
          m.at(x, y) = 1;
          continue;
        }
        const Vec3 xc = src.rotation() * hit.point + src.translation();
        if (!(xc.z() > 0.0)) {
          m.at(x, y) = 1;
          continue;
        }
        const Vec3 p = src.intrinsics() * xc;
        const double u = p.x() / p.z(), v = p.y() / p.z();
        if (!(u >= 0.0 && v >= 0.0 && u <= w - 1 && v <= h - 1) ||
            occludedFrom(planes, src, hit.point, hit.plane)) {
          m.at(x, y) = 1;
        }
      }
    }
  }, 8);
  return m;
}

std::vector<GroundTruth> renderSequence(const SyntheticScene& scene, int count) {
  std::vector<GroundTruth> out;
  for (int t = 0; t < count; ++t) out.push_back(renderGroundTruth(scene, scene.camera, t));
  return out;
}

std::vector<FrameInputs> jitteredSequence(const SyntheticScene& scene, int count, int jitterPx,
                                          std::uint64_t seed) {
  std::vector<FrameInputs> out;
  const GroundTruth clean = renderGroundTruth(scene, scene.camera, 0);
  std::uint64_t state = seed;
  const int span = 2 * jitterPx + 1;
  for (int t = 0; t < count; ++t) {
    std::vector<TexturedPlane> planes = planesAt(scene, 0);
    for (auto& p : planes) {
      if (p.instanceId == 0) continue;
      const int dx = static_cast<int>(splitmix64(state) % static_cast<std::uint64_t>(span)) - jitterPx;
      const int dy = static_cast<int>(splitmix64(state) % static_cast<std::uint64_t>(span)) - jitterPx;
      const double mx = dx * p.depth / scene.camera.fx(), my = dy * p.depth / scene.camera.fy();
      p.x0 += mx;
      p.x1 += mx;
      p.y0 += my;
      p.y1 += my;
    }
    const GroundTruth noisy = renderPlanes(scene, planes, scene.camera);
    out.push_back(FrameInputs{clean.image, noisy.depth, noisy.semantics});
  }
  return out;
}

BruteForceResult bruteForceEnergyMin(const FrameInputs& in, const EnergyParams& params,
                                     const std::optional<LayerModel>& fixedModel) {
  const int w = in.width(), h = in.height();
  const int n = w * h;
  const int K = fixedModel ? fixedModel->labelCount() : params.K;
  if (n > 16 || K > 3 || K < 1) throw InputError("brute force is limited to 4x4 inputs and K <= 3");
  const double delta = params.huberDelta > 0.0 ? params.huberDelta : defaultHuberDelta(in.depth);

  // Pairwise weight between two pixels, written out directly.
  auto pairWeight = [&](int x0, int y0, int x1, int y1) {
    const double dr = in.image.at(x0, y0, 0) - in.image.at(x1, y1, 0);
    const double dg = in.image.at(x0, y0, 1) - in.image.at(x1, y1, 1);
    const double db = in.image.at(x0, y0, 2) - in.image.at(x1, y1, 2);
    const double b = std::max(in.semantics.semanticEdge.at(x0, y0), in.semantics.semanticEdge.at(x1, y1));
    return params.lambdaB * std::exp(-(params.alphaGrad * std::sqrt(dr * dr + dg * dg + db * db) + params.betaSem * b));
  };

  BruteForceResult best;
  best.labels = PlaneI(w, h, 1, 0);
  best.energy = std::numeric_limits<double>::infinity();

  if (!fixedModel) {
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(K);
    PlaneI labels(w, h, 1, 0);
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t c = code;
      for (int i = 0; i < n; ++i) {
        labels.data()[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(c % K);
        c /= static_cast<std::size_t>(K);
      }
      const double e = evaluateEnergy(labels, in, params);
      if (e < best.energy) {
        best.energy = e;
        best.labels = labels;
      }
    }
    return best;
  }

  const LayerModel& m = *fixedModel;
  auto unaryAt = [&](int x, int y, int k) {
    double e = 0.0;
    if (in.depth.isValid(x, y)) {
      const double r = std::abs(in.depth.values.at(x, y) - m.depth[static_cast<std::size_t>(k)]);
      const double rho = r <= delta ? r * r / (2.0 * delta) : r - delta / 2.0;
      e += in.depth.stability.at(x, y) * rho;
    }
    if (in.semantics.label.at(x, y) != m.majorityClass[static_cast<std::size_t>(k)]) {
      const double s = in.semantics.saliency.at(x, y);
      const double ws = params.logisticSaliency ? 1.0 / (1.0 + std::exp(-12.0 * (s - 0.5))) : std::clamp(s, 0.0, 1.0);
      e += ws * params.kappaSem;
    }
    const std::int32_t id = in.semantics.instance.at(x, y);
    if (id != 0) {
      const auto it = m.instanceOwner.find(id);
      if (it == m.instanceOwner.end() || it->second != k) e += params.kappaInst;
    }
    return e;
  };

  // All labelings of one row, scored with their unary and horizontal terms.
  int rowStates = 1;
  for (int x = 0; x < w; ++x) rowStates *= K;
  auto digit = [&](int state, int x) {
    for (int i = 0; i < x; ++i) state /= K;
    return state % K;
  };
  std::vector<std::vector<double>> rowCost(static_cast<std::size_t>(h), std::vector<double>(static_cast<std::size_t>(rowStates)));
  for (int y = 0; y < h; ++y) {
    for (int s = 0; s < rowStates; ++s) {
      double e = 0.0;
      for (int x = 0; x < w; ++x) {
        e += unaryAt(x, y, digit(s, x));
        if (x + 1 < w && digit(s, x) != digit(s, x + 1)) e += pairWeight(x, y, x + 1, y);
      }
      rowCost[static_cast<std::size_t>(y)][static_cast<std::size_t>(s)] = e;
    }
  }
  auto vertical = [&](int y, int a, int b) {
    double e = 0.0;
    for (int x = 0; x < w; ++x) {
      if (digit(a, x) != digit(b, x)) e += pairWeight(x, y, x, y + 1);
    }
    return e;
  };
  std::vector<double> acc(rowCost[0]);
  std::vector<std::vector<int>> from(static_cast<std::size_t>(h), std::vector<int>(static_cast<std::size_t>(rowStates), -1));
  for (int y = 1; y < h; ++y) {
    std::vector<double> next(static_cast<std::size_t>(rowStates), std::numeric_limits<double>::infinity());
    for (int b = 0; b < rowStates; ++b) {
      for (int a = 0; a < rowStates; ++a) {
        const double e = acc[static_cast<std::size_t>(a)] + vertical(y - 1, a, b);
        if (e < next[static_cast<std::size_t>(b)]) {
          next[static_cast<std::size_t>(b)] = e;
          from[static_cast<std::size_t>(y)][static_cast<std::size_t>(b)] = a;
        }
      }
      next[static_cast<std::size_t>(b)] += rowCost[static_cast<std::size_t>(y)][static_cast<std::size_t>(b)];
    }
    acc = std::move(next);
  }
  int s = static_cast<int>(std::min_element(acc.begin(), acc.end()) - acc.begin());
  best.energy = acc[static_cast<std::size_t>(s)];
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) best.labels.at(x, y) = digit(s, x);
    if (y > 0) s = from[static_cast<std::size_t>(y)][static_cast<std::size_t>(s)];
  }
  return best;
}

std::array<double, 4> bruteForceComposite(std::span<const Layer> stack, int x, int y, bool straight) {
  std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
  double transmittance = 1.0;
  for (const Layer& L : stack) {
    const double a = L.rgba.at(x, y, 3);
    for (int c = 0; c < 3; ++c) {
      const double pre = L.rgba.at(x, y, c);
      const double contribution = straight ? (a > 0.0 ? a * (pre / a) : 0.0) : pre;
      out[static_cast<std::size_t>(c)] += transmittance * contribution;
    }
    transmittance *= 1.0 - a;
  }
  out[3] = 1.0 - transmittance;
  return out;
}

}  // namespace cpsl
