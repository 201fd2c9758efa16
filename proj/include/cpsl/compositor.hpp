#pragma once

#include <array>
#include <span>
#include <vector>

#include "cpsl/core.hpp"

namespace cpsl {

inline constexpr float kVisibleAlpha = 0.5f;        // depthFront threshold
// Per-pixel early exit. The skipped remainder is bounded by the cutoff.
inline constexpr float kTransmittanceCutoff = 1e-6f;

struct CompositeOutput {
  ImageF color;     // premultiplied RGB
  PlaneF coverage;  // 1 - prod(1 - alpha_j)
  PlaneF depthFront;  // depth of the first layer with alpha > kVisibleAlpha, +inf if none

  int width() const { return color.width(); }
  int height() const { return color.height(); }
};

/// Front-to-back premultiplied compositing of layers sorted near to far.
/// Throws InvariantError if the layers are not sorted by increasing depth or
/// differ in size.
CompositeOutput composite(std::span<const Layer> warped);

/// color + (1 - coverage) * backdrop.
ImageF compositeOverBackdrop(const CompositeOutput& out, std::array<float, 3> backdrop);

/// Empty composite (zero coverage) of the given size.
CompositeOutput emptyComposite(int width, int height);

}  // namespace cpsl
