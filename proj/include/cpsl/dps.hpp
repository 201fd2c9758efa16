#pragma once

#include <span>
#include <vector>

#include "cpsl/compositor.hpp"
#include "cpsl/core.hpp"

namespace cpsl {

struct DpsParams {
  double wMin = 2.0;          // band width at zero parallax (px)
  double wMax = 24.0;         // band width cap (px)
  double cParallax = 1.0;     // band growth per pixel of parallax
  double tauEdge = 0.25;      // alpha-gradient threshold for silhouettes
  double rEdc = 3.0;          // EDC association radius (px)
  int searchRadius = 24;      // how far behind a contour to look for a farther layer (px)
  float holeCoverage = 0.98f;  // band pixels are those whose coverage falls below this
};

/// EDC sample carried into the viewer's screen space.
struct ProjectedEdgeSample {
  Vec2 target;
  Vec2 source;
  int frontLayer = 0;
  int backLayer = 0;
  double zFront = 0.0;
  double zBack = 0.0;
};

/// Places every cache sample on its front layer's plane and reprojects it.
/// Samples that land behind the viewer are dropped.
std::vector<ProjectedEdgeSample> projectEdgeDepthCache(const EdgeDepthCache& edc,
                                                       const LayerSet& ls, const Camera& src,
                                                       const Camera& viewer);

struct SilhouettePixel {
  int x = 0;
  int y = 0;
  int frontLayer = 0;
  int backLayer = 0;
  Vec2 outward{1.0, 0.0};  // unit direction away from the front layer
  int edcIndex = -1;       // nearest projected EDC sample within rEdc, or -1
};

/// Inner contour pixels of each warped layer whose alpha gradient exceeds
/// tauEdge and behind which a farther layer appears within searchRadius.
std::vector<SilhouettePixel> detectSilhouettes(std::span<const Layer> warped,
                                               std::span<const ProjectedEdgeSample> edc,
                                               const DpsParams& params);

/// Silhouette pixels as a mask, dilated by `radius` px.
Mask silhouetteBand(const std::vector<SilhouettePixel>& boundaries, int width, int height,
                    int radius);

struct StripBand {
  Mask mask;
  PlaneF gamma;       // blend weight, 0 at the front contour, 1 at the band's outer edge
  PlaneI frontLayer;  // -1 outside the band
  PlaneI backLayer;
  PlaneI anchor;      // linear index of the silhouette pixel the band pixel hangs off
  PlaneF zFront;
  PlaneF zBack;
  std::vector<double> widths;  // band width per silhouette pixel

  int width() const { return mask.width(); }
  int height() const { return mask.height(); }
};

/// Band width for one silhouette: clamp(wMin + cParallax * parallax, wMin, wMax).
double stripWidth(double parallaxPx, const DpsParams& params);

inline double smoothstep01(double t) {
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return t * t * (3.0 - 2.0 * t);
}

/// Builds the view-dependent strip. Parallax per silhouette comes from the
/// associated EDC depth gap, or from the layers' reference depths when no
/// sample is close enough.
StripBand buildStrip(const std::vector<SilhouettePixel>& boundaries,
                     std::span<const Layer> warped, const Camera& viewer, const Camera& src,
                     std::span<const ProjectedEdgeSample> edc, const DpsParams& params);

/// Fills the coverage deficit of band pixels with a blend of the front
/// layer's color (at the anchor) and the back layer's (un-premultiplied),
/// composited behind the existing color. Band coverage becomes 1 and depth
/// interpolates between the two layers. Pixels outside the band are copied
/// unchanged.
CompositeOutput applyStrip(const CompositeOutput& composite, std::span<const Layer> warped,
                           const StripBand& strip);

}  // namespace cpsl
