#pragma once

#include <vector>

#include "cpsl/core.hpp"

namespace cpsl {

struct RdPoint {
  double rate = 0.0;
  double distortion = 0.0;
  int quality = 0;  // codec setting that produced the point
};

/// Lower convex hull of a layer's (rate, distortion) samples: rates strictly
/// increasing, distortions strictly decreasing, slopes strictly flattening.
struct RdCurve {
  std::vector<RdPoint> points;

  /// Throws InvariantError on empty input or non-finite values.
  static RdCurve fromSamples(std::vector<RdPoint> samples);
  double minRate() const { return points.front().rate; }
};

struct Allocation {
  std::vector<int> point;     // chosen hull index per layer
  std::vector<double> rates;  // chosen rate per layer
  double lambda = 0.0;        // slope at which the sweep stopped
  double totalRate() const;
};

/// Discrete Lagrangian allocation of min sum w_k D_k(r_k) s.t. sum r_k <= budget.
/// Weights are normalized to sum 1 (uniform when all are zero). Equivalent to
/// bisecting lambda: hull segments are taken in order of decreasing weighted
/// slope, and segments with equal slope are taken together or not at all.
/// Throws InfeasibleError when the budget is below the sum of minimum rates.
Allocation allocateRates(const std::vector<RdCurve>& curves, const std::vector<double>& weights,
                         double budget);

/// w_k proportional to saliencyScore_k + mu * edgeDensity_k, with edgeDensity
/// the 0.5-contour pixel count over the opaque (alpha >= 0.5) area. Normalized
/// to sum 1; uniform when every raw weight is zero.
std::vector<double> layerWeights(const LayerSet& ls, double mu = 1.0);

}  // namespace cpsl
