#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cpsl/core.hpp"
#include "cpsl/energy.hpp"

namespace cpsl {

/// Fronto-parallel textured rectangle at world depth `depth`. The world frame
/// is the frame of the scene's source camera.
struct TexturedPlane {
  double depth = 1.0;
  double x0 = -1.0, y0 = -1.0, x1 = 1.0, y1 = 1.0;  // extent on the plane (m)
  std::int32_t instanceId = 0;
  std::int32_t label = 0;
  float saliency = 0.0f;
  std::array<float, 3> base{0.5f, 0.5f, 0.5f};
  std::uint32_t seed = 1;
  double noiseScale = 0.4;  // texture feature size (m)
  Vec2 velocity{0.0, 0.0};  // rigid motion per frame (m)
};

struct SyntheticScene {
  int width = 256;
  int height = 192;
  Camera camera;
  std::vector<TexturedPlane> planes;

  /// Plane `i` displaced by its velocity at `frame`.
  TexturedPlane planeAt(std::size_t i, int frame) const;

  /// Large background at z = 4 and a salient textured card at z = 3.2.
  static SyntheticScene twoPlane(int width = 256, int height = 192);
  /// Background plus `count` slabs at increasing depths (for K sweeps).
  static SyntheticScene slabs(int width, int height, int count);
};

struct GroundTruth {
  ImageF image;
  DepthMap depth;
  SemanticMaps semantics;
  PlaneI planeIndex;  // visible plane per pixel, -1 for none

  FrameInputs inputs() const { return FrameInputs{image, depth, semantics}; }
};

/// Deterministic procedural texture of a plane at plane-local coordinates (m).
std::array<float, 3> planeTexture(const TexturedPlane& p, double u, double v);

/// Exact ray casting of the scene at `frame` through pixel centers of `cam`.
/// Pixels hitting no plane get depth marked invalid and a black color.
GroundTruth renderGroundTruth(const SyntheticScene& scene, const Camera& cam, int frame = 0);

/// Pixels of `dst` whose visible surface point is not visible from `src`
/// (occluded there, or projecting outside [0, w-1] x [0, h-1]).
Mask disocclusionMask(const SyntheticScene& scene, const Camera& src, const Camera& dst, int frame = 0);

/// Frames 0..count-1 with planes moving at their velocities.
std::vector<GroundTruth> renderSequence(const SyntheticScene& scene, int count);

/// Static scene whose depth and semantic maps (not the image) have every
/// non-background plane displaced by a random integer offset in
/// [-jitterPx, jitterPx]^2 per frame, mimicking unstable per-frame estimates.
std::vector<FrameInputs> jitteredSequence(const SyntheticScene& scene, int count, int jitterPx,
                                          std::uint64_t seed);

struct BruteForceResult {
  PlaneI labels;
  double energy = 0.0;
};

/// Exhaustive minimum over all K^(W*H) labelings (inputs up to 4x4, K <= 3).
/// With a fixed model the search is organized row by row (exact dynamic
/// programming over full row labelings); without one every labeling is
/// scored by evaluateEnergy with its own derived model.
BruteForceResult bruteForceEnergyMin(const FrameInputs& in, const EnergyParams& params,
                                     const std::optional<LayerModel>& fixedModel = std::nullopt);

/// Straight-line per-pixel evaluation of front-to-back compositing over a
/// near-to-far stack. Returns {r, g, b, coverage}. With `straight`, colors
/// are un-premultiplied first and re-weighted by alpha.
std::array<double, 4> bruteForceComposite(std::span<const Layer> stack, int x, int y,
                                          bool straight = false);

/// splitmix64 step; the scene generators use it for reproducible noise.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace cpsl
