#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "cpsl/core.hpp"
#include "cpsl/energy.hpp"

namespace cpsl {

struct PromotionParams {
  double thetaPromote = 0.3;  // joint saliency score needed for a dedicated layer
  double textureWeight = 1.0;  // weight of the texture term in the merge cost
};

struct LayerGroup {
  double depth = 1.0;          // median depth of the group's valid pixels
  double saliencyScore = 0.0;  // mean saliency over the group
  bool promoted = false;
  std::set<std::int32_t> instanceIds;
  std::size_t area = 0;
};

/// Pixel-to-group map with groups ordered by strictly increasing depth.
struct GroupedAssignment {
  PlaneI groups;
  std::vector<LayerGroup> info;

  int groupCount() const { return static_cast<int>(info.size()); }
};

/// Joint saliency score of every instance: mean saliency times area
/// normalized by the largest instance.
std::vector<std::pair<std::int32_t, double>> instanceScores(const SemanticMaps& sem);

/// Merge cost of two pixel sets: depth variance of their union plus the
/// texture difference (mean color distance + mean gradient difference).
double mergeCost(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                 const FrameInputs& in, double textureWeight);

/// Promotes salient instances to dedicated groups, then greedily merges
/// depth-adjacent background regions by ascending merge cost until at most
/// `layerBudget` groups remain. Throws BudgetInfeasibleError when the
/// promoted instances (plus one background group, if any background
/// remains) do not fit the budget.
GroupedAssignment promoteAndMerge(const LayerAssignment& assign, const FrameInputs& in,
                                  const PromotionParams& params, int layerBudget);

struct MatteParams {
  double w0 = 1.0;
  double a = 0.5;   // depth-gradient coefficient
  double b = 2.0;   // uncertainty coefficient, acts on (1 - stability)
  double wMin = 1.0;
  double wMax = 16.0;

  void validate() const;
};

/// Per-pixel feather width of one group: w0 + a*|grad z| + b*(1 - stability),
/// clamped to [wMin, wMax]. The depth gradient only uses same-group neighbours.
PlaneF featherWidth(const Mask& region, const DepthMap& depth, const MatteParams& params);

/// Clamped linear ramp 0.5 - sd / w across the contour of `region`, with sd
/// the signed distance (negative inside) and w the local feather width.
PlaneF featherMatte(const Mask& region, const DepthMap& depth, const MatteParams& params);

/// Soft mattes from the signed distance to each group's contour, premultiplied
/// colors, and group median depths.
LayerSet matteLayers(const GroupedAssignment& grouped, const FrameInputs& in,
                     const MatteParams& params, const Camera& camera, int frameIndex = 0,
                     int maxLayers = kDefaultMaxLayers);

/// One sample per inner 0.5-contour pixel of every non-last layer, pointing
/// at the nearest layer behind it with the quantized local depth gap.
EdgeDepthCache buildEdgeDepthCache(const LayerSet& ls, const DepthMap& depth,
                                   const DzQuantizer& quantizer);

/// Normalized local contrast times a centered Gaussian prior, in [0,1].
PlaneF fallbackSaliency(const ImageF& image);

struct DecomposeParams {
  EnergyParams energy;
  PromotionParams promotion;
  MatteParams matte;
  int layerBudget = 4;
  int maxLayers = kDefaultMaxLayers;
  DzQuantizer quantizer{0.0, 16.0};
};

struct DecomposedFrame {
  LayerSet layers;
  EdgeDepthCache edc;
  LayerAssignment assignment;
  GroupedAssignment grouped;
};

/// Full per-frame decomposition: energy solve, promotion/merging, matting,
/// and the edge-depth cache.
DecomposedFrame decomposeFrame(const FrameInputs& in, const Camera& camera, int frameIndex,
                               const DecomposeParams& params);

}  // namespace cpsl
