#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cpsl/image.hpp"

namespace cpsl {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

inline constexpr int kDefaultMaxLayers = 12;

/// Pinhole camera. The pose maps world points into the camera frame:
/// X_cam = rotation * X_world + translation.
class Camera {
 public:
  Camera() = default;

  /// Throws InvariantError unless fx, fy > 0 and rotation is orthonormal
  /// within 1e-6.
  static Camera make(double fx, double fy, double cx, double cy,
                     const Mat3& rotation = Mat3::Identity(),
                     const Vec3& translation = Vec3::Zero());

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Mat3 intrinsics() const;
  Mat3 intrinsicsInverse() const;
  Vec3 center() const { return -rotation_.transpose() * translation_; }

  Camera withPose(const Mat3& rotation, const Vec3& translation) const {
    return make(fx_, fy_, cx_, cy_, rotation, translation);
  }

  bool operator==(const Camera& o) const;

 private:
  double fx_ = 1.0, fy_ = 1.0, cx_ = 0.0, cy_ = 0.0;
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

/// Metric depth with an explicit validity mask and a per-pixel stability map.
struct DepthMap {
  PlaneF values;     // metres, meaningful only where valid != 0
  Mask valid;
  PlaneF stability;  // [0,1]

  int width() const { return values.width(); }
  int height() const { return values.height(); }
  bool isValid(int x, int y) const { return valid.at(x, y) != 0; }

  /// Every positive finite value is valid; stability defaults to 1.
  static DepthMap fromValues(PlaneF values);
  /// Clamps stability to [0,1]; throws InvariantError on non-positive valid
  /// depths or mismatched sizes.
  static DepthMap make(PlaneF values, Mask valid, PlaneF stability);

  std::size_t validCount() const;
};

struct SemanticMaps {
  PlaneF saliency;      // [0,1]
  PlaneI label;         // semantic class
  PlaneI instance;      // 0 = background
  PlaneF semanticEdge;  // [0,1]

  int width() const { return saliency.width(); }
  int height() const { return saliency.height(); }

  /// Zero saliency, single class, no instances, no semantic edges.
  static SemanticMaps blank(int width, int height);
  /// Throws InvariantError if any map is out of range or mis-sized.
  static SemanticMaps make(PlaneF saliency, PlaneI label, PlaneI instance, PlaneF semanticEdge);
};

/// One depth-ordered RGBA slice. `rgba` holds premultiplied color in
/// channels 0..2 and alpha in channel 3.
struct Layer {
  ImageF rgba;
  double depth = 1.0;
  double confidence = 1.0;
  double saliencyScore = 0.0;
  std::set<std::int32_t> instanceIds;

  int width() const { return rgba.width(); }
  int height() const { return rgba.height(); }
  float alpha(int x, int y) const { return rgba.at(x, y, 3); }

  bool operator==(const Layer& o) const = default;
};

struct LayerSet {
  std::vector<Layer> layers;  // nearest first
  int frameIndex = 0;
  Camera sourceCamera;

  std::size_t size() const { return layers.size(); }
  int width() const { return layers.empty() ? 0 : layers.front().width(); }
  int height() const { return layers.empty() ? 0 : layers.front().height(); }

  bool operator==(const LayerSet& o) const = default;
};

/// Returns one human-readable entry per violated invariant; empty when valid.
std::vector<std::string> validateLayerSet(const LayerSet& ls, int maxLayers = kDefaultMaxLayers);

/// Validated constructor: throws InvariantError listing the violations.
LayerSet makeLayerSet(std::vector<Layer> layers, int frameIndex, const Camera& camera,
                      int maxLayers = kDefaultMaxLayers);

/// mu-law style logarithmic 8-bit quantizer for boundary depth gaps.
class DzQuantizer {
 public:
  DzQuantizer() = default;
  DzQuantizer(double dzMin, double dzMax, double mu = 255.0);

  std::uint8_t quantize(double dz) const;
  double dequantize(std::uint8_t code) const;
  /// Width of the quantization cell containing `dz`.
  double stepAt(double dz) const;

  double dzMin() const { return dzMin_; }
  double dzMax() const { return dzMax_; }
  double mu() const { return mu_; }

  bool operator==(const DzQuantizer& o) const = default;

 private:
  double dzMin_ = 0.0;
  double dzMax_ = 10.0;
  double mu_ = 255.0;
};

struct EdgeSample {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint8_t frontLayer = 0;
  std::uint8_t backLayer = 0;
  std::uint8_t dzQuant = 0;

  bool operator==(const EdgeSample& o) const = default;
};

struct EdgeDepthCache {
  std::vector<EdgeSample> samples;
  DzQuantizer quantizer;

  bool empty() const { return samples.empty(); }
  bool operator==(const EdgeDepthCache& o) const = default;
};

/// Checks the cache against the layer set it was built from.
std::vector<std::string> validateEdgeDepthCache(const EdgeDepthCache& edc, const LayerSet& ls);

}  // namespace cpsl
