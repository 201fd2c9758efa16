#include <algorithm>
#include <cmath>

#include "cpsl/distance.hpp"
#include "cpsl/errors.hpp"
#include "cpsl/layergen.hpp"
#include "cpsl/parallel.hpp"

namespace cpsl {

void MatteParams::validate() const {
  if (!(w0 > 0.0) || a < 0.0 || b < 0.0) {
    throw InvariantError("matte params need w0 > 0 and a, b >= 0");
  }
  if (!(wMin > 0.0) || !(wMax >= wMin)) throw InvariantError("matte params need 0 < wMin <= wMax");
}

PlaneF featherWidth(const Mask& region, const DepthMap& depth, const MatteParams& params) {
  const int w = region.width();
  const int h = region.height();
  PlaneF out(w, h, 1, static_cast<float>(params.w0));
  auto usable = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && region.at(x, y) && depth.isValid(x, y);
  };
  // One-sided or central differences restricted to the group.
  auto diff = [&](int x, int y, int dx, int dy) -> double {
    const bool f = usable(x + dx, y + dy);
    const bool b = usable(x - dx, y - dy);
    const double z = depth.values.at(x, y);
    if (f && b) return 0.5 * (depth.values.at(x + dx, y + dy) - depth.values.at(x - dx, y - dy));
    if (f) return depth.values.at(x + dx, y + dy) - z;
    if (b) return z - depth.values.at(x - dx, y - dy);
    return 0.0;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double grad = 0.0;
      if (usable(x, y)) {
        const double gx = diff(x, y, 1, 0);
        const double gy = diff(x, y, 0, 1);
        grad = std::sqrt(gx * gx + gy * gy);
      }
      const double uncertainty = 1.0 - depth.stability.at(x, y);
      const double v = params.w0 + params.a * grad + params.b * uncertainty;
      out.at(x, y) = static_cast<float>(std::clamp(v, params.wMin, params.wMax));
    }
  }
  return out;
}

PlaneF featherMatte(const Mask& region, const DepthMap& depth, const MatteParams& params) {
  const int w = region.width();
  const int h = region.height();
  Mask outside(w, h, 1, 0);
  for (std::size_t i = 0; i < region.pixelCount(); ++i) outside.data()[i] = region.data()[i] ? 0 : 1;
  const PlaneF width = featherWidth(region, depth, params);
  const DistanceField toInside = distanceTransform(region);
  const DistanceField toOutside = distanceTransform(outside);
  PlaneF alpha(w, h, 1, 0.0f);
  for (std::size_t i = 0; i < alpha.pixelCount(); ++i) {
    float sd;
    float wf;
    if (region.data()[i]) {
      sd = -(toOutside.distance.data()[i] - 0.5f);
      wf = width.data()[i];
    } else {
      sd = toInside.distance.data()[i] - 0.5f;
      const int n = toInside.nearest.data()[i];
      wf = n >= 0 ? width.data()[static_cast<std::size_t>(n)] : static_cast<float>(params.wMin);
    }
    float a = std::clamp(0.5f - sd / wf, 0.0f, 1.0f);
    if (!std::isfinite(a)) a = sd < 0 ? 1.0f : 0.0f;
    alpha.data()[i] = a;
  }
  return alpha;
}

LayerSet matteLayers(const GroupedAssignment& grouped, const FrameInputs& in,
                     const MatteParams& params, const Camera& camera, int frameIndex,
                     int maxLayers) {
  params.validate();
  const int w = grouped.groups.width();
  const int h = grouped.groups.height();
  const int G = grouped.groupCount();
  std::vector<Layer> layers(static_cast<std::size_t>(G));

  parallelFor(0, G, [&](int g0, int g1) {
    for (int g = g0; g < g1; ++g) {
      Mask region(w, h, 1, 0);
      for (std::size_t i = 0; i < region.pixelCount(); ++i) region.data()[i] = grouped.groups.data()[i] == g;
      const PlaneF alpha = featherMatte(region, in.depth, params);

      Layer& L = layers[static_cast<std::size_t>(g)];
      L.rgba = ImageF(w, h, 4, 0.0f);
      L.depth = grouped.info[static_cast<std::size_t>(g)].depth;
      L.confidence = 1.0;
      L.saliencyScore = grouped.info[static_cast<std::size_t>(g)].saliencyScore;
      L.instanceIds = grouped.info[static_cast<std::size_t>(g)].instanceIds;
      for (std::size_t i = 0; i < alpha.pixelCount(); ++i) {
        const float a = alpha.data()[i];
        float* p = L.rgba.data().data() + i * 4;
        for (int c = 0; c < 3; ++c) p[c] = a * in.image.data()[i * 3 + static_cast<std::size_t>(c)];
        p[3] = a;
      }
    }
  });
  return makeLayerSet(std::move(layers), frameIndex, camera, maxLayers);
}

EdgeDepthCache buildEdgeDepthCache(const LayerSet& ls, const DepthMap& depth,
                                   const DzQuantizer& quantizer) {
  EdgeDepthCache edc;
  edc.quantizer = quantizer;
  const int K = static_cast<int>(ls.size());
  if (K < 2) return edc;
  const int w = ls.width();
  const int h = ls.height();
  constexpr int kSearch = 2;
  for (int f = 0; f + 1 < K; ++f) {
    const Layer& front = ls.layers[static_cast<std::size_t>(f)];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (front.alpha(x, y) < 0.5f) continue;
        // Inner side of a 0.5 crossing.
        int ox = -1, oy = -1;
        for (auto [dx, dy] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}}) {
          const int nx = x + dx, ny = y + dy;
          if (nx >= 0 && ny >= 0 && nx < w && ny < h && front.alpha(nx, ny) < 0.5f) {
            ox = nx;
            oy = ny;
            break;
          }
        }
        if (ox < 0) continue;
        // Nearest layer behind f that is visible around the contour.
        int back = -1;
        int bx = ox, by = oy;
        for (int b = f + 1; b < K && back < 0; ++b) {
          const Layer& L = ls.layers[static_cast<std::size_t>(b)];
          for (int dy = -kSearch; dy <= kSearch && back < 0; ++dy) {
            for (int dx = -kSearch; dx <= kSearch && back < 0; ++dx) {
              const int nx = x + dx, ny = y + dy;
              if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
              if (L.alpha(nx, ny) >= 0.5f && front.alpha(nx, ny) < 0.5f) {
                back = b;
                bx = nx;
                by = ny;
              }
            }
          }
        }
        if (back < 0) continue;
        double zf = ls.layers[static_cast<std::size_t>(f)].depth;
        double zb = ls.layers[static_cast<std::size_t>(back)].depth;
        if (depth.isValid(x, y) && depth.isValid(bx, by) && depth.values.at(bx, by) > depth.values.at(x, y)) {
          zf = depth.values.at(x, y);
          zb = depth.values.at(bx, by);
        }
        EdgeSample s;
        s.x = static_cast<std::uint16_t>(x);
        s.y = static_cast<std::uint16_t>(y);
        s.frontLayer = static_cast<std::uint8_t>(f);
        s.backLayer = static_cast<std::uint8_t>(back);
        s.dzQuant = quantizer.quantize(zb - zf);
        edc.samples.push_back(s);
      }
    }
  }
  return edc;
}

}  // namespace cpsl
