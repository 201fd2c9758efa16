#include "cpsl/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpsl/errors.hpp"

namespace cpsl {

Camera Camera::make(double fx, double fy, double cx, double cy, const Mat3& rotation,
                    const Vec3& translation) {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw InvariantError("camera focal lengths must be positive");
  }
  if (!rotation.allFinite() || !translation.allFinite() || !std::isfinite(cx) ||
      !std::isfinite(cy)) {
    throw InvariantError("camera parameters must be finite");
  }
  const double err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (err > 1e-6) {
    throw InvariantError("camera rotation is not orthonormal");
  }
  Camera c;
  c.fx_ = fx;
  c.fy_ = fy;
  c.cx_ = cx;
  c.cy_ = cy;
  c.rotation_ = rotation;
  c.translation_ = translation;
  return c;
}

Mat3 Camera::intrinsics() const {
  Mat3 k;
  k << fx_, 0.0, cx_, 0.0, fy_, cy_, 0.0, 0.0, 1.0;
  return k;
}

Mat3 Camera::intrinsicsInverse() const {
  Mat3 k;
  k << 1.0 / fx_, 0.0, -cx_ / fx_, 0.0, 1.0 / fy_, -cy_ / fy_, 0.0, 0.0, 1.0;
  return k;
}

bool Camera::operator==(const Camera& o) const {
  return fx_ == o.fx_ && fy_ == o.fy_ && cx_ == o.cx_ && cy_ == o.cy_ &&
         rotation_ == o.rotation_ && translation_ == o.translation_;
}

DepthMap DepthMap::fromValues(PlaneF values) {
  Mask valid(values.width(), values.height(), 1, 0);
  for (std::size_t i = 0; i < values.pixelCount(); ++i) {
    const float z = values.data()[i];
    valid.data()[i] = (std::isfinite(z) && z > 0.0f) ? 1 : 0;
    if (!valid.data()[i]) values.data()[i] = 0.0f;
  }
  PlaneF stability(values.width(), values.height(), 1, 1.0f);
  return DepthMap{std::move(values), std::move(valid), std::move(stability)};
}

DepthMap DepthMap::make(PlaneF values, Mask valid, PlaneF stability) {
  if (!values.sameSize(valid) || !values.sameSize(stability)) {
    throw InvariantError("depth map planes differ in size");
  }
  for (std::size_t i = 0; i < values.pixelCount(); ++i) {
    if (valid.data()[i]) {
      const float z = values.data()[i];
      if (!std::isfinite(z) || !(z > 0.0f)) {
        throw InvariantError("valid depth must be strictly positive");
      }
    } else {
      values.data()[i] = 0.0f;
    }
    float& s = stability.data()[i];
    s = std::isfinite(s) ? std::clamp(s, 0.0f, 1.0f) : 0.0f;
  }
  return DepthMap{std::move(values), std::move(valid), std::move(stability)};
}

std::size_t DepthMap::validCount() const {
  return static_cast<std::size_t>(std::count_if(valid.data().begin(), valid.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

SemanticMaps SemanticMaps::blank(int width, int height) {
  return SemanticMaps{PlaneF(width, height, 1, 0.0f), PlaneI(width, height, 1, 0),
                      PlaneI(width, height, 1, 0), PlaneF(width, height, 1, 0.0f)};
}

SemanticMaps SemanticMaps::make(PlaneF saliency, PlaneI label, PlaneI instance,
                                PlaneF semanticEdge) {
  if (!saliency.sameSize(label) || !saliency.sameSize(instance) ||
      !saliency.sameSize(semanticEdge)) {
    throw InvariantError("semantic maps differ in size");
  }
  auto inUnit = [](float v) { return v >= 0.0f && v <= 1.0f; };
  if (!std::all_of(saliency.data().begin(), saliency.data().end(), inUnit)) {
    throw InvariantError("saliency outside [0,1]");
  }
  if (!std::all_of(semanticEdge.data().begin(), semanticEdge.data().end(), inUnit)) {
    throw InvariantError("semantic edge strength outside [0,1]");
  }
  return SemanticMaps{std::move(saliency), std::move(label), std::move(instance),
                      std::move(semanticEdge)};
}

std::vector<std::string> validateLayerSet(const LayerSet& ls, int maxLayers) {
  std::vector<std::string> out;
  const int k = static_cast<int>(ls.layers.size());
  if (k < 1 || k > maxLayers) {
    std::ostringstream os;
    os << "layer count " << k << " outside [1, " << maxLayers << "]";
    out.push_back(os.str());
  }
  bool orderReported = false;
  bool premulReported = false;
  for (int i = 0; i < k; ++i) {
    const Layer& l = ls.layers[i];
    if (l.rgba.channels() != 4) {
      out.push_back("layer " + std::to_string(i) + " is not RGBA");
      continue;
    }
    if (!l.rgba.sameSize(ls.layers.front().rgba)) {
      out.push_back("layer " + std::to_string(i) + " size differs from layer 0");
    }
    if (!(l.depth > 0.0) || !std::isfinite(l.depth)) {
      out.push_back("layer " + std::to_string(i) + " depth not positive");
    }
    if (i > 0 && !(ls.layers[i - 1].depth < l.depth) && !orderReported) {
      out.push_back("depth order violated");
      orderReported = true;
    }
    if (!(l.confidence >= 0.0 && l.confidence <= 1.0)) {
      out.push_back("layer " + std::to_string(i) + " confidence outside [0,1]");
    }
    bool rangeBad = false;
    bool premulBad = false;
    const auto d = l.rgba.data();
    for (std::size_t p = 0; p + 3 < d.size(); p += 4) {
      const float a = d[p + 3];
      if (!(a >= 0.0f && a <= 1.0f)) rangeBad = true;
      for (int c = 0; c < 3; ++c) {
        const float v = d[p + c];
        if (!(v >= 0.0f && v <= 1.0f)) rangeBad = true;
        if (v > a + 1e-6f) premulBad = true;
      }
    }
    if (rangeBad) out.push_back("layer " + std::to_string(i) + " values outside [0,1]");
    if (premulBad && !premulReported) {
      out.push_back("premultiplication violated");
      premulReported = true;
    }
  }
  return out;
}

LayerSet makeLayerSet(std::vector<Layer> layers, int frameIndex, const Camera& camera,
                      int maxLayers) {
  LayerSet ls{std::move(layers), frameIndex, camera};
  const auto violations = validateLayerSet(ls, maxLayers);
  if (!violations.empty()) {
    std::string msg = "invalid layer set:";
    for (const auto& v : violations) msg += " " + v + ";";
    throw InvariantError(msg);
  }
  return ls;
}

DzQuantizer::DzQuantizer(double dzMin, double dzMax, double mu)
    : dzMin_(dzMin), dzMax_(dzMax), mu_(mu) {
  if (!(dzMax > dzMin) || !(mu > 0.0)) {
    throw InvariantError("dz quantizer needs dzMax > dzMin and mu > 0");
  }
}

std::uint8_t DzQuantizer::quantize(double dz) const {
  const double t = std::clamp((dz - dzMin_) / (dzMax_ - dzMin_), 0.0, 1.0);
  const double y = std::log1p(mu_ * t) / std::log1p(mu_);
  return static_cast<std::uint8_t>(std::lround(y * 255.0));
}

double DzQuantizer::dequantize(std::uint8_t code) const {
  const double y = code / 255.0;
  const double t = std::expm1(y * std::log1p(mu_)) / mu_;
  return dzMin_ + t * (dzMax_ - dzMin_);
}

double DzQuantizer::stepAt(double dz) const {
  const std::uint8_t c = quantize(dz);
  const double lo = dequantize(c == 0 ? 0 : static_cast<std::uint8_t>(c - 1));
  const double hi = dequantize(c == 255 ? 255 : static_cast<std::uint8_t>(c + 1));
  return (hi - lo) / ((c == 0 || c == 255) ? 1.0 : 2.0);
}

std::vector<std::string> validateEdgeDepthCache(const EdgeDepthCache& edc, const LayerSet& ls) {
  std::vector<std::string> out;
  const int k = static_cast<int>(ls.size());
  for (std::size_t i = 0; i < edc.samples.size(); ++i) {
    const EdgeSample& s = edc.samples[i];
    if (!(s.frontLayer < s.backLayer)) {
      out.push_back("sample " + std::to_string(i) + " front layer not nearer than back layer");
      continue;
    }
    if (s.backLayer >= k) {
      out.push_back("sample " + std::to_string(i) + " references missing layer");
      continue;
    }
    const Layer& f = ls.layers[s.frontLayer];
    if (!f.rgba.inside(s.x, s.y)) {
      out.push_back("sample " + std::to_string(i) + " outside image");
      continue;
    }
    // An alpha 0.5 crossing must lie within 2 px.
    bool nearContour = false;
    for (int dy = -2; dy <= 2 && !nearContour; ++dy) {
      for (int dx = -2; dx <= 2 && !nearContour; ++dx) {
        const int x = s.x + dx, y = s.y + dy;
        if (!f.rgba.inside(x, y)) continue;
        const bool in = f.alpha(x, y) >= 0.5f;
        for (auto [nx, ny] : {std::pair{x + 1, y}, std::pair{x, y + 1}}) {
          if (f.rgba.inside(nx, ny) && (f.alpha(nx, ny) >= 0.5f) != in) nearContour = true;
        }
      }
    }
    if (!nearContour) out.push_back("sample " + std::to_string(i) + " not on a contour");
  }
  return out;
}

}  // namespace cpsl
