#pragma once

#include "cpsl/image.hpp"

namespace cpsl {

struct DistanceField {
  PlaneF distance;  // Euclidean distance to the nearest seed; +inf without seeds
  PlaneI nearest;   // linear index (y * width + x) of that seed; -1 without seeds
};

/// Exact Euclidean distance transform (lower-envelope of parabolas, separable).
DistanceField distanceTransform(const Mask& seeds);

/// Signed distance to the boundary of `region`: positive outside, negative
/// inside, with the boundary halfway between pixel centers (so the pixels
/// adjacent to the boundary sit at +/-0.5).
PlaneF signedDistance(const Mask& region);

/// Pixels of `region` with at least one 4-neighbour outside it (image
/// borders do not count as outside).
Mask innerContour(const Mask& region);

Mask dilate(const Mask& m, int radius);

}  // namespace cpsl
