#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "cpsl/bundle.hpp"
#include "cpsl/energy.hpp"
#include "cpsl/layergen.hpp"
#include "cpsl/synth.hpp"

namespace cpsl::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
inline int uniformInt(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Mat3 rotationYawPitchRoll(double yaw, double pitch, double roll) {
  using Eigen::AngleAxisd;
  return (AngleAxisd(roll, Vec3::UnitZ()) * AngleAxisd(pitch, Vec3::UnitX()) * AngleAxisd(yaw, Vec3::UnitY()))
      .toRotationMatrix();
}

inline Camera randomCamera(Rng& rng, int w, int h, double maxAngle, double maxShift) {
  const double f = uniform(rng, 0.6, 1.4) * w;
  const Mat3 R = rotationYawPitchRoll(uniform(rng, -maxAngle, maxAngle), uniform(rng, -maxAngle, maxAngle),
                                      uniform(rng, -maxAngle, maxAngle));
  const Vec3 t(uniform(rng, -maxShift, maxShift), uniform(rng, -maxShift, maxShift),
               uniform(rng, -maxShift, maxShift));
  return Camera::make(f, f * uniform(rng, 0.9, 1.1), 0.5 * (w - 1), 0.5 * (h - 1), R, t);
}

/// Random alpha in [0,1] with a share of exact 0 and 1.
inline float randomAlpha(Rng& rng) {
  const int pick = uniformInt(rng, 0, 9);
  if (pick == 0) return 0.0f;
  if (pick == 1) return 1.0f;
  return static_cast<float>(uniform(rng, 0.0, 1.0));
}

/// Near-to-far stack of random premultiplied layers.
inline std::vector<Layer> randomStack(Rng& rng, int K, int w, int h) {
  std::vector<Layer> out(static_cast<std::size_t>(K));
  double z = uniform(rng, 0.5, 2.0);
  for (auto& L : out) {
    L.rgba = ImageF(w, h, 4, 0.0f);
    L.depth = z;
    z += uniform(rng, 0.05, 2.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float a = randomAlpha(rng);
        float* p = L.rgba.pixel(x, y);
        for (int c = 0; c < 3; ++c) p[c] = a * static_cast<float>(uniform(rng, 0.0, 1.0));
        p[3] = a;
      }
    }
  }
  return out;
}

/// Random decomposition inputs: texture, depth with holes, 3 classes, 2 instances.
inline FrameInputs randomInputs(Rng& rng, int w, int h) {
  FrameInputs in;
  in.image = ImageF(w, h, 3, 0.0f);
  for (float& v : in.image.storage()) v = static_cast<float>(uniform(rng, 0.0, 1.0));
  PlaneF depth(w, h, 1, 0.0f);
  Mask valid(w, h, 1, 1);
  PlaneF stability(w, h, 1, 1.0f);
  for (std::size_t i = 0; i < depth.pixelCount(); ++i) {
    depth.data()[i] = static_cast<float>(uniform(rng, 1.0, 5.0));
    stability.data()[i] = static_cast<float>(uniform(rng, 0.0, 1.0));
    if (uniformInt(rng, 0, 7) == 0) valid.data()[i] = 0;
  }
  valid.data()[0] = 1;
  in.depth = DepthMap::make(std::move(depth), std::move(valid), std::move(stability));
  PlaneF sal(w, h, 1, 0.0f), edge(w, h, 1, 0.0f);
  PlaneI label(w, h, 1, 0), inst(w, h, 1, 0);
  for (std::size_t i = 0; i < sal.pixelCount(); ++i) {
    sal.data()[i] = static_cast<float>(uniform(rng, 0.0, 1.0));
    edge.data()[i] = static_cast<float>(uniform(rng, 0.0, 1.0));
    label.data()[i] = uniformInt(rng, 0, 2);
    inst.data()[i] = uniformInt(rng, 0, 2);
  }
  in.semantics = SemanticMaps::make(std::move(sal), std::move(label), std::move(inst), std::move(edge));
  return in;
}

inline LayerModel randomModel(Rng& rng, int K) {
  LayerModel m;
  double z = uniform(rng, 0.8, 2.0);
  for (int k = 0; k < K; ++k) {
    m.depth.push_back(z);
    z += uniform(rng, 0.2, 2.0);
    m.majorityClass.push_back(uniformInt(rng, -1, 2));
  }
  for (std::int32_t id = 1; id <= 2; ++id) {
    if (uniformInt(rng, 0, 3) > 0) m.instanceOwner[id] = uniformInt(rng, 0, K - 1);
  }
  return m;
}

/// Random valid layer set with an EDC referencing it.
inline BundleFrame randomBundleFrame(Rng& rng, int K, int w, int h, const Camera& cam, int frameIndex) {
  BundleFrame f;
  f.layers.layers = randomStack(rng, K, w, h);
  f.layers.frameIndex = frameIndex;
  f.layers.sourceCamera = cam;
  for (auto& L : f.layers.layers) {
    L.confidence = uniform(rng, 0.0, 1.0);
    L.saliencyScore = uniform(rng, 0.0, 1.0);
    L.instanceIds = {uniformInt(rng, 1, 9)};
  }
  f.edc.quantizer = DzQuantizer(0.0, 8.0);
  const int n = uniformInt(rng, 0, 40);
  for (int i = 0; i < n; ++i) {
    EdgeSample s;
    s.x = static_cast<std::uint16_t>(uniformInt(rng, 0, w - 1));
    s.y = static_cast<std::uint16_t>(uniformInt(rng, 0, h - 1));
    s.frontLayer = static_cast<std::uint8_t>(uniformInt(rng, 0, K - 2));
    s.backLayer = static_cast<std::uint8_t>(uniformInt(rng, s.frontLayer + 1, K - 1));
    s.dzQuant = static_cast<std::uint8_t>(uniformInt(rng, 0, 255));
    f.edc.samples.push_back(s);
  }
  f.type = frameIndex == 0 ? FrameType::I : FrameType::P;
  return f;
}

/// Hard-matted layer set straight from a ground-truth render: one layer per
/// visible plane, one-pixel feathering, exact depths.
inline LayerSet groundTruthLayers(const SyntheticScene& scene, const GroundTruth& gt) {
  std::vector<std::pair<double, int>> order;
  for (std::size_t p = 0; p < scene.planes.size(); ++p) order.emplace_back(scene.planes[p].depth, static_cast<int>(p));
  std::sort(order.begin(), order.end());
  const int w = gt.image.width(), h = gt.image.height();
  std::vector<Layer> layers;
  for (const auto& [z, p] : order) {
    Layer L;
    L.rgba = ImageF(w, h, 4, 0.0f);
    L.depth = z;
    L.saliencyScore = scene.planes[static_cast<std::size_t>(p)].saliency;
    bool any = false;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (gt.planeIndex.at(x, y) != p) continue;
        any = true;
        float* q = L.rgba.pixel(x, y);
        for (int c = 0; c < 3; ++c) q[c] = gt.image.at(x, y, c);
        q[3] = 1.0f;
      }
    }
    if (any) layers.push_back(std::move(L));
  }
  return makeLayerSet(std::move(layers), 0, scene.camera);
}

}  // namespace cpsl::test
