#pragma once

// Per-pixel kernels shared by the reference render path (materialized warped
// layers) and the fused renderer (layers sampled on demand). Both paths go
// through the same arithmetic so their outputs agree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cpsl/dps.hpp"
#include "cpsl/errors.hpp"
#include "cpsl/geometry.hpp"

namespace cpsl::detail {

using Float4 = float __attribute__((vector_size(16)));

inline Float4 load4(const float* p) {
  Float4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

/// Source position of target pixel (x, y) under M (target to source).
/// False when the pixel looks at the plane from behind.
inline bool sourcePosition(const Mat3& M, int x, int y, double& u, double& v) {
  const double z = M(2, 0) * x + M(2, 1) * y + M(2, 2);
  if (!(z > 0.0)) return false;
  const double inv = 1.0 / z;
  u = (M(0, 0) * x + M(0, 1) * y + M(0, 2)) * inv;
  v = (M(1, 0) * x + M(1, 1) * y + M(1, 2)) * inv;
  return true;
}

/// Samples `src` at the source position of target pixel (x, y) under M
/// (target to source). Writes premultiplied RGBA, zero when nothing lands.
inline void sampleWarp(const ImageF& src, const Mat3& M, int x, int y, Filter filter, float out[4]) {
  out[0] = out[1] = out[2] = out[3] = 0.0f;
  const int sw = src.width();
  const int sh = src.height();
  double u, v;
  if (!sourcePosition(M, x, y, u, v)) return;
  if (filter == Filter::Nearest) {
    const double ru = std::nearbyint(u);
    const double rv = std::nearbyint(v);
    if (!(ru >= 0.0 && rv >= 0.0 && ru < sw && rv < sh)) return;
    std::memcpy(out, src.pixel(static_cast<int>(ru), static_cast<int>(rv)), 4 * sizeof(float));
    return;
  }
  if (!(u > -1.0 && v > -1.0 && u < sw && v < sh)) return;
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const float fx = static_cast<float>(u - x0);
  const float fy = static_cast<float>(v - y0);
  const float w00 = (1.0f - fx) * (1.0f - fy);
  const float w10 = fx * (1.0f - fy);
  const float w01 = (1.0f - fx) * fy;
  const float w11 = fx * fy;
  Float4 acc = {0.0f, 0.0f, 0.0f, 0.0f};
  if (x0 >= 0 && y0 >= 0 && x0 + 1 < sw && y0 + 1 < sh) {
    const float* p = src.pixel(x0, y0);
    const float* q = p + 4 * static_cast<std::size_t>(sw);
    acc = w00 * load4(p) + w10 * load4(p + 4) + w01 * load4(q) + w11 * load4(q + 4);
  } else {
    auto tap = [&](int sx, int sy, float w) {
      if (sx < 0 || sy < 0 || sx >= sw || sy >= sh) return;
      acc += w * load4(src.pixel(sx, sy));
    };
    tap(x0, y0, w00);
    tap(x0 + 1, y0, w10);
    tap(x0, y0 + 1, w01);
    tap(x0 + 1, y0 + 1, w11);
  }
  const float a = std::min(acc[3], 1.0f);
  out[0] = std::min(acc[0], a);
  out[1] = std::min(acc[1], a);
  out[2] = std::min(acc[2], a);
  out[3] = a;
}

/// Alpha channel of sampleWarp, same expression per lane.
inline float sampleWarpAlpha(const ImageF& src, const Mat3& M, int x, int y, Filter filter) {
  const int sw = src.width();
  const int sh = src.height();
  double u, v;
  if (!sourcePosition(M, x, y, u, v)) return 0.0f;
  if (filter == Filter::Nearest) {
    const double ru = std::nearbyint(u);
    const double rv = std::nearbyint(v);
    if (!(ru >= 0.0 && rv >= 0.0 && ru < sw && rv < sh)) return 0.0f;
    return src.at(static_cast<int>(ru), static_cast<int>(rv), 3);
  }
  if (!(u > -1.0 && v > -1.0 && u < sw && v < sh)) return 0.0f;
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const float fx = static_cast<float>(u - x0);
  const float fy = static_cast<float>(v - y0);
  const float w00 = (1.0f - fx) * (1.0f - fy);
  const float w10 = fx * (1.0f - fy);
  const float w01 = (1.0f - fx) * fy;
  const float w11 = fx * fy;
  float acc = 0.0f;
  if (x0 >= 0 && y0 >= 0 && x0 + 1 < sw && y0 + 1 < sh) {
    const float* p = src.pixel(x0, y0) + 3;
    const float* q = p + 4 * static_cast<std::size_t>(sw);
    acc = w00 * p[0] + w10 * p[4] + w01 * q[0] + w11 * q[4];
  } else {
    auto tap = [&](int sx, int sy, float w) {
      if (sx < 0 || sy < 0 || sx >= sw || sy >= sh) return;
      acc += w * src.at(sx, sy, 3);
    };
    tap(x0, y0, w00);
    tap(x0 + 1, y0, w10);
    tap(x0, y0 + 1, w01);
    tap(x0 + 1, y0 + 1, w11);
  }
  return std::min(acc, 1.0f);
}

/// Warped layers already in memory.
struct MaterializedView {
  std::span<const Layer> layers;

  int size() const { return static_cast<int>(layers.size()); }
  int width() const { return layers.front().width(); }
  int height() const { return layers.front().height(); }
  double depth(int k) const { return layers[static_cast<std::size_t>(k)].depth; }
  float alpha(int k, int x, int y) const { return layers[static_cast<std::size_t>(k)].rgba.at(x, y, 3); }
  void pixel(int k, int x, int y, float out[4]) const {
    const float* p = layers[static_cast<std::size_t>(k)].rgba.pixel(x, y);
    std::copy(p, p + 4, out);
  }
};

inline constexpr float kDefinedAlpha = 1e-3f;

// Buckets projected samples by (front layer, cell) for radius queries.
class SampleGrid {
 public:
  SampleGrid(std::span<const ProjectedEdgeSample> samples, double cell)
      : samples_(samples), cell_(std::max(cell, 1.0)) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      buckets_[key(samples[i].frontLayer, cellOf(samples[i].target.x()), cellOf(samples[i].target.y()))]
          .push_back(static_cast<int>(i));
    }
  }

  int nearest(int front, double x, double y, double radius) const {
    int best = -1;
    double bestD2 = radius * radius;
    const long cx = cellOf(x), cy = cellOf(y);
    for (long dy = -1; dy <= 1; ++dy) {
      for (long dx = -1; dx <= 1; ++dx) {
        const auto it = buckets_.find(key(front, cx + dx, cy + dy));
        if (it == buckets_.end()) continue;
        for (int i : it->second) {
          const Vec2 d = samples_[static_cast<std::size_t>(i)].target - Vec2(x, y);
          const double d2 = d.squaredNorm();
          if (d2 <= bestD2 && (best < 0 || d2 < bestD2 || i < best)) {
            bestD2 = d2;
            best = i;
          }
        }
      }
    }
    return best;
  }

  bool empty() const { return samples_.empty(); }

 private:
  long cellOf(double v) const { return static_cast<long>(std::floor(v / cell_)); }
  static std::uint64_t key(int front, long cx, long cy) {
    return (static_cast<std::uint64_t>(front & 0xff) << 56) ^
           (static_cast<std::uint64_t>(cx & 0xfffffff) << 28) ^ static_cast<std::uint64_t>(cy & 0xfffffff);
  }

  std::span<const ProjectedEdgeSample> samples_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<int>> buckets_;
};

inline void unpremultiply(const float* p, float out[3]) {
  const float a = p[3];
  for (int c = 0; c < 3; ++c) out[c] = a > 0.0f ? std::min(1.0f, p[c] / a) : 0.0f;
}

/// Silhouette test for pixel (x, y) of front layer f.
template <class View>
std::optional<SilhouettePixel> silhouetteAt(const View& V, int f, int x, int y, const DpsParams& params,
                                            const SampleGrid& grid) {
  const int w = V.width();
  const int h = V.height();
  if (V.alpha(f, x, y) < 0.5f) return std::nullopt;
  const float l = V.alpha(f, std::max(x - 1, 0), y);
  const float r = V.alpha(f, std::min(x + 1, w - 1), y);
  const float u = V.alpha(f, x, std::max(y - 1, 0));
  const float d = V.alpha(f, x, std::min(y + 1, h - 1));
  const bool contour = (x > 0 && l < 0.5f) || (x + 1 < w && r < 0.5f) || (y > 0 && u < 0.5f) ||
                       (y + 1 < h && d < 0.5f);
  if (!contour) return std::nullopt;
  const double gx = 0.5 * (r - l);
  const double gy = 0.5 * (d - u);
  const double g = std::sqrt(gx * gx + gy * gy);
  if (!(g > params.tauEdge)) return std::nullopt;
  const Vec2 outward(-gx / g, -gy / g);
  const int K = V.size();
  int back = -1;
  for (int t = 1; t <= params.searchRadius && back < 0; ++t) {
    const int qx = static_cast<int>(std::lround(x + outward.x() * t));
    const int qy = static_cast<int>(std::lround(y + outward.y() * t));
    if (qx < 0 || qy < 0 || qx >= w || qy >= h) break;
    for (int b = f + 1; b < K; ++b) {
      if (V.alpha(b, qx, qy) >= 0.5f) {
        back = b;
        break;
      }
    }
  }
  if (back < 0) return std::nullopt;
  SilhouettePixel s;
  s.x = x;
  s.y = y;
  s.frontLayer = f;
  s.backLayer = back;
  s.outward = outward;
  s.edcIndex = grid.empty() ? -1 : grid.nearest(f, x, y, params.rEdc);
  return s;
}

/// Strip construction into `band`. Planes already of the frame size are
/// assumed to hold their defaults; `best` likewise holds +inf. Band pixels
/// are appended to `touched` when given. `Coverage` provides at(x, y) for the
/// plain composite coverage and anyHole(x0, y0, x1, y1) as a conservative
/// window pre-test.
template <class View, class Coverage>
void buildStripInto(const std::vector<SilhouettePixel>& boundaries, const View& V, Coverage& coverage,
                    const Camera& viewer, const Camera& src, std::span<const ProjectedEdgeSample> edc,
                    const DpsParams& params, StripBand& band, PlaneF& best, std::vector<int>* touched) {
  const int K = V.size();
  const int w = K > 0 ? V.width() : 0;
  const int h = K > 0 ? V.height() : 0;
  if (!band.mask.sameSize(w, h)) {
    band.mask = Mask(w, h, 1, 0);
    band.gamma = PlaneF(w, h, 1, 0.0f);
    band.frontLayer = PlaneI(w, h, 1, -1);
    band.backLayer = PlaneI(w, h, 1, -1);
    band.anchor = PlaneI(w, h, 1, -1);
    band.zFront = PlaneF(w, h, 1, 0.0f);
    band.zBack = PlaneF(w, h, 1, 0.0f);
  }
  if (!best.sameSize(w, h)) best = PlaneF(w, h, 1, std::numeric_limits<float>::infinity());
  band.widths.clear();
  if (boundaries.empty()) return;

  // Homographies are only needed for silhouettes without an EDC sample.
  std::vector<std::optional<Mat3>> homographies(static_cast<std::size_t>(K));
  auto sourcePixel = [&](const SilhouettePixel& s) -> Vec2 {
    if (s.edcIndex >= 0) return edc[static_cast<std::size_t>(s.edcIndex)].source;
    auto& H = homographies[static_cast<std::size_t>(s.frontLayer)];
    if (!H) H = planeHomography(src, viewer, V.depth(s.frontLayer)).H;
    const Vec3 p = *H * Vec3(s.x, s.y, 1.0);
    return {p.x() / p.z(), p.y() / p.z()};
  };

  const std::size_t n = boundaries.size();
  band.widths.resize(n);
  std::vector<double> zf(n), zb(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SilhouettePixel& s = boundaries[i];
    if (s.edcIndex >= 0) {
      zf[i] = edc[static_cast<std::size_t>(s.edcIndex)].zFront;
      zb[i] = edc[static_cast<std::size_t>(s.edcIndex)].zBack;
    } else {
      zf[i] = V.depth(s.frontLayer);
      zb[i] = V.depth(s.backLayer);
    }
    double parallax = 0.0;
    try {
      parallax = parallaxMagnitude(src, viewer, sourcePixel(s), zf[i], std::max(zb[i], zf[i] * (1.0 + 1e-9)));
    } catch (const Error&) {
      parallax = params.wMax;
    }
    band.widths[i] = stripWidth(parallax, params);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const SilhouettePixel& s = boundaries[i];
    const double W = band.widths[i];
    const int r = static_cast<int>(std::ceil(W + 0.5));
    const int x0 = std::max(s.x - r, 0), x1 = std::min(s.x + r, w - 1);
    const int y0 = std::max(s.y - r, 0), y1 = std::min(s.y + r, h - 1);
    if (!coverage.anyHole(x0, y0, x1, y1)) continue;
    for (int y = y0; y <= y1; ++y) {
      if (!coverage.anyHole(x0, y, x1, y)) continue;
      const int dy = y - s.y;
      for (int x = x0; x <= x1; ++x) {
        const int dx = x - s.x;
        if (dx == 0 && dy == 0) continue;
        if (dx * s.outward.x() + dy * s.outward.y() <= 0.0) continue;
        if (coverage.at(x, y) >= params.holeCoverage) continue;
        const double d = std::sqrt(double(dx * dx + dy * dy)) - 0.5;
        if (d > W) continue;
        const float dn = static_cast<float>(d);
        if (!(dn < best.at(x, y))) continue;
        if (V.alpha(s.frontLayer, x, y) >= 0.5f) continue;
        best.at(x, y) = dn;
        if (touched && !band.mask.at(x, y)) touched->push_back(y * w + x);
        band.mask.at(x, y) = 1;
        band.gamma.at(x, y) = static_cast<float>(smoothstep01(d / W));
        band.frontLayer.at(x, y) = s.frontLayer;
        band.backLayer.at(x, y) = s.backLayer;
        band.anchor.at(x, y) = s.y * w + s.x;
        band.zFront.at(x, y) = static_cast<float>(zf[i]);
        band.zBack.at(x, y) = static_cast<float>(zb[i]);
      }
    }
  }
}

/// Puts touched band pixels back to their defaults.
inline void clearStrip(StripBand& band, PlaneF& best, std::vector<int>& touched) {
  for (int i : touched) {
    const auto j = static_cast<std::size_t>(i);
    band.mask.data()[j] = 0;
    band.gamma.data()[j] = 0.0f;
    band.frontLayer.data()[j] = -1;
    band.backLayer.data()[j] = -1;
    band.anchor.data()[j] = -1;
    band.zFront.data()[j] = 0.0f;
    band.zBack.data()[j] = 0.0f;
    best.data()[j] = std::numeric_limits<float>::infinity();
  }
  touched.clear();
}

/// Repairs one band pixel in place.
template <class View>
void repairPixel(const CompositeOutput& composite, const View& V, const StripBand& strip, int x, int y,
                 CompositeOutput& out) {
  constexpr int kMaxReach = 64;
  const int w = strip.width();
  const int h = strip.height();
  const int f = strip.frontLayer.at(x, y);
  const int b = strip.backLayer.at(x, y);
  const int a = strip.anchor.at(x, y);
  const int ax = a % w, ay = a / w;
  float px[4];
  float cf[3], cb[3];
  V.pixel(f, ax, ay, px);
  unpremultiply(px, cf);
  bool backDefined = false;
  V.pixel(b, x, y, px);
  if (px[3] > kDefinedAlpha) {
    unpremultiply(px, cb);
    backDefined = true;
  } else {
    // Bridge the hole: take the back layer where it reappears.
    const double dx = x - ax, dy = y - ay;
    const double len = std::sqrt(dx * dx + dy * dy);
    for (int t = 1; t <= kMaxReach && !backDefined; ++t) {
      const int qx = static_cast<int>(std::lround(x + dx / len * t));
      const int qy = static_cast<int>(std::lround(y + dy / len * t));
      if (qx < 0 || qy < 0 || qx >= w || qy >= h) break;
      if (V.alpha(b, qx, qy) >= 0.5f) {
        V.pixel(b, qx, qy, px);
        unpremultiply(px, cb);
        backDefined = true;
      }
    }
  }
  if (!backDefined) std::copy(cf, cf + 3, cb);
  const float g = strip.gamma.at(x, y);
  // The strip sits behind everything already composited.
  const float deficit = 1.0f - composite.coverage.at(x, y);
  for (int c = 0; c < 3; ++c) {
    out.color.at(x, y, c) = composite.color.at(x, y, c) + deficit * ((1.0f - g) * cf[c] + g * cb[c]);
  }
  out.coverage.at(x, y) = 1.0f;
  out.depthFront.at(x, y) = (1.0f - g) * strip.zFront.at(x, y) + g * strip.zBack.at(x, y);
}

}  // namespace cpsl::detail
