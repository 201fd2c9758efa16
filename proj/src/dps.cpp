#include "cpsl/dps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <unordered_map>

#include "cpsl/errors.hpp"
#include "cpsl/geometry.hpp"
#include "cpsl/parallel.hpp"
#include "kernels.hpp"

namespace cpsl {
using detail::MaterializedView;
using detail::SampleGrid;

std::vector<ProjectedEdgeSample> projectEdgeDepthCache(const EdgeDepthCache& edc,
                                                       const LayerSet& ls, const Camera& src,
                                                       const Camera& viewer) {
  std::vector<ProjectedEdgeSample> out;
  out.reserve(edc.samples.size());
  for (const EdgeSample& s : edc.samples) {
    if (s.backLayer >= ls.size()) continue;
    ProjectedEdgeSample p;
    p.source = Vec2(s.x, s.y);
    p.frontLayer = s.frontLayer;
    p.backLayer = s.backLayer;
    p.zFront = ls.layers[s.frontLayer].depth;
    p.zBack = p.zFront + std::max(edc.quantizer.dequantize(s.dzQuant), 1e-6);
    try {
      p.target = reprojectPoint(src, viewer, p.source, p.zFront).pixel;
    } catch (const BehindCameraError&) {
      continue;
    }
    out.push_back(p);
  }
  return out;
}

std::vector<SilhouettePixel> detectSilhouettes(std::span<const Layer> warped,
                                               std::span<const ProjectedEdgeSample> edc,
                                               const DpsParams& params) {
  std::vector<SilhouettePixel> out;
  const int K = static_cast<int>(warped.size());
  if (K < 2) return out;
  const MaterializedView V{warped};
  const int w = V.width();
  const int h = V.height();
  const SampleGrid grid(edc, params.rEdc);

  for (int f = 0; f + 1 < K; ++f) {
    std::vector<std::vector<SilhouettePixel>> rows(static_cast<std::size_t>(h));
    parallelFor(0, h, [&](int y0, int y1) {
      for (int y = y0; y < y1; ++y) {
        for (int x = 0; x < w; ++x) {
          if (auto s = detail::silhouetteAt(V, f, x, y, params, grid)) rows[static_cast<std::size_t>(y)].push_back(*s);
        }
      }
    }, 8);
    for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

Mask silhouetteBand(const std::vector<SilhouettePixel>& boundaries, int width, int height,
                    int radius) {
  Mask m(width, height, 1, 0);
  const int r2 = radius * radius;
  for (const auto& s : boundaries) {
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy > r2) continue;
        const int x = s.x + dx, y = s.y + dy;
        if (x >= 0 && y >= 0 && x < width && y < height) m.at(x, y) = 1;
      }
    }
  }
  return m;
}

double stripWidth(double parallaxPx, const DpsParams& params) {
  return std::clamp(params.wMin + params.cParallax * parallaxPx, params.wMin, params.wMax);
}

namespace {

// Plain composite coverage recomputed from the warped layers on demand.
class LazyCoverage {
 public:
  explicit LazyCoverage(std::span<const Layer> warped)
      : warped_(warped),
        cache_(warped.empty() ? 0 : warped.front().width(), warped.empty() ? 0 : warped.front().height(), 1,
               -1.0f) {}

  float at(int x, int y) {
    float& c = cache_.at(x, y);
    if (c < 0.0f) {
      float T = 1.0f;
      for (const Layer& L : warped_) T *= 1.0f - L.rgba.at(x, y, 3);
      c = 1.0f - T;
    }
    return c;
  }
  bool anyHole(int, int, int, int) const { return true; }

 private:
  std::span<const Layer> warped_;
  PlaneF cache_;
};

}  // namespace

StripBand buildStrip(const std::vector<SilhouettePixel>& boundaries,
                     std::span<const Layer> warped, const Camera& viewer, const Camera& src,
                     std::span<const ProjectedEdgeSample> edc, const DpsParams& params) {
  LazyCoverage coverage(warped);
  StripBand band;
  PlaneF best;
  detail::buildStripInto(boundaries, MaterializedView{warped}, coverage, viewer, src, edc, params, band, best,
                         nullptr);
  return band;
}

CompositeOutput applyStrip(const CompositeOutput& composite, std::span<const Layer> warped,
                           const StripBand& strip) {
  CompositeOutput out = composite;
  const MaterializedView V{warped};
  const int w = strip.width();
  const int h = strip.height();
  parallelFor(0, h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        if (strip.mask.at(x, y)) detail::repairPixel(composite, V, strip, x, y, out);
      }
    }
  }, 8);
  return out;
}

}  // namespace cpsl
