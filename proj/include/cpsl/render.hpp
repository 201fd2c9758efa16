#pragma once

#include <array>
#include <vector>

#include "cpsl/compositor.hpp"
#include "cpsl/dps.hpp"
#include "cpsl/geometry.hpp"

namespace cpsl {

struct RenderParams {
  Filter filter = Filter::Bilinear;
  bool dps = true;
  DpsParams dpsParams;
};

struct StageTimes {
  double warpMs = 0.0;
  double compositeMs = 0.0;
  double dpsMs = 0.0;
};

struct RenderResult {
  std::vector<Layer> warped;
  CompositeOutput plain;  // before repair
  CompositeOutput out;    // after repair (== plain when DPS is off)
  std::vector<SilhouettePixel> silhouettes;
  StripBand strip;
  StageTimes times;
};

/// Warps every layer into the viewer with its plane homography. Layers keep
/// their source depths, so the result stays sorted near to far.
std::vector<Layer> warpLayers(const LayerSet& ls, const Camera& viewer, Filter filter);

/// Warp, composite and (optionally) DPS repair for one viewer pose.
RenderResult renderView(const LayerSet& ls, const EdgeDepthCache& edc, const Camera& viewer,
                        const RenderParams& params = {});

/// Render path for many poses of one layer set. Layers are sampled on demand
/// and culled per screen tile, so no warped images are built. The output
/// matches renderView(...).out. Holds references to `ls` and `edc`. Keeps
/// scratch buffers, so one instance must not render from two threads at once.
class FrameRenderer {
 public:
  FrameRenderer(const LayerSet& ls, const EdgeDepthCache& edc);

  CompositeOutput render(const Camera& viewer, const RenderParams& params = {},
                         StageTimes* times = nullptr) const;
  /// Same, reusing `out`'s storage when it already has the frame size.
  void render(const Camera& viewer, const RenderParams& params, CompositeOutput& out,
              StageTimes* times = nullptr) const;

  /// Time spent building the occupancy tables in the constructor.
  double prepareMs() const { return prepareMs_; }

 private:
  // Prefix sums over 8x8 source blocks, one table per flag.
  struct Occupancy {
    int bw = 0;
    int bh = 0;
    std::vector<int> any;   // blocks holding a pixel with alpha > 0
    std::vector<int> edge;  // blocks holding a pixel on a 0.5 crossing or the image border
  };

  const LayerSet& ls_;
  const EdgeDepthCache& edc_;
  std::vector<Occupancy> occupancy_;
  mutable StripBand strip_;
  mutable PlaneF best_;
  mutable std::vector<int> touched_;
  double prepareMs_ = 0.0;
};

/// Pivot depth used for orbit poses: median of the layer depths weighted by
/// opaque area.
double sceneMedianDepth(const LayerSet& ls);

}  // namespace cpsl
