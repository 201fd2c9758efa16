#include "cpsl/compositor.hpp"

#include <limits>

#include "cpsl/errors.hpp"
#include "cpsl/parallel.hpp"

namespace cpsl {

CompositeOutput emptyComposite(int width, int height) {
  return CompositeOutput{ImageF(width, height, 3, 0.0f), PlaneF(width, height, 1, 0.0f),
                         PlaneF(width, height, 1, std::numeric_limits<float>::infinity())};
}

CompositeOutput composite(std::span<const Layer> warped) {
  if (warped.empty()) throw InvariantError("composite needs at least one layer");
  const int w = warped.front().width();
  const int h = warped.front().height();
  for (std::size_t k = 0; k < warped.size(); ++k) {
    if (!warped[k].rgba.sameSize(w, h) || warped[k].rgba.channels() != 4) {
      throw InvariantError("composite layers differ in size");
    }
    if (k > 0 && !(warped[k - 1].depth < warped[k].depth)) {
      throw InvariantError("composite layers are not sorted near to far");
    }
  }

  CompositeOutput out = emptyComposite(w, h);
  const int K = static_cast<int>(warped.size());
  parallelFor(0, h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      float* col = out.color.row(y);
      float* cov = out.coverage.row(y);
      float* dep = out.depthFront.row(y);
      for (int x = 0; x < w; ++x) {
        float r = 0.0f, g = 0.0f, b = 0.0f;
        float T = 1.0f;
        float zf = std::numeric_limits<float>::infinity();
        for (int k = 0; k < K; ++k) {
          const float* p = warped[k].rgba.pixel(x, y);
          const float a = p[3];
          if (a <= 0.0f) continue;
          r += T * p[0];
          g += T * p[1];
          b += T * p[2];
          if (a > kVisibleAlpha && zf == std::numeric_limits<float>::infinity()) {
            zf = static_cast<float>(warped[k].depth);
          }
          T *= 1.0f - a;
          if (T < kTransmittanceCutoff) break;
        }
        col[3 * x + 0] = r;
        col[3 * x + 1] = g;
        col[3 * x + 2] = b;
        cov[x] = 1.0f - T;
        dep[x] = zf;
      }
    }
  }, 8);
  return out;
}

ImageF compositeOverBackdrop(const CompositeOutput& out, std::array<float, 3> backdrop) {
  ImageF img(out.width(), out.height(), 3, 0.0f);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const float t = 1.0f - out.coverage.at(x, y);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = out.color.at(x, y, c) + t * backdrop[c];
    }
  }
  return img;
}

}  // namespace cpsl
