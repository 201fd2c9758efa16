#include "cpsl/distance.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "cpsl/parallel.hpp"

namespace cpsl {
namespace {

constexpr double kInf = 1e20;

// 1D squared-distance transform of sampled function f with argmin tracking.
void envelope1d(const double* f, const int* fArg, int n, double* d, int* dArg, int* v,
                double* z) {
  int k = 0;
  int first = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] < kInf) {
      first = q;
      break;
    }
  }
  if (first < 0) {
    for (int q = 0; q < n; ++q) {
      d[q] = kInf;
      dArg[q] = -1;
    }
    return;
  }
  v[0] = first;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = first + 1; q < n; ++q) {
    if (!(f[q] < kInf)) continue;
    double s = 0.0;
    for (;;) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const int p = v[k];
    d[q] = double(q - p) * (q - p) + f[p];
    dArg[q] = fArg[p];
  }
}

}  // namespace

DistanceField distanceTransform(const Mask& seeds) {
  const int w = seeds.width();
  const int h = seeds.height();
  std::vector<double> colD(static_cast<std::size_t>(w) * h);
  std::vector<int> colArg(static_cast<std::size_t>(w) * h);

  // Columns: distance along y to the nearest seed in the same column.
  parallelFor(0, w, [&](int x0, int x1) {
    std::vector<double> f(h), d(h), z(h + 1);
    std::vector<int> fa(h), da(h), v(h);
    for (int x = x0; x < x1; ++x) {
      for (int y = 0; y < h; ++y) {
        const bool s = seeds.at(x, y) != 0;
        f[y] = s ? 0.0 : kInf;
        fa[y] = s ? y * w + x : -1;
      }
      envelope1d(f.data(), fa.data(), h, d.data(), da.data(), v.data(), z.data());
      for (int y = 0; y < h; ++y) {
        colD[static_cast<std::size_t>(y) * w + x] = d[y];
        colArg[static_cast<std::size_t>(y) * w + x] = da[y];
      }
    }
  }, 16);

  DistanceField out{PlaneF(w, h, 1, std::numeric_limits<float>::infinity()), PlaneI(w, h, 1, -1)};
  parallelFor(0, h, [&](int y0, int y1) {
    std::vector<double> d(w), z(w + 1);
    std::vector<int> da(w), v(w);
    for (int y = y0; y < y1; ++y) {
      const double* f = colD.data() + static_cast<std::size_t>(y) * w;
      const int* fa = colArg.data() + static_cast<std::size_t>(y) * w;
      envelope1d(f, fa, w, d.data(), da.data(), v.data(), z.data());
      for (int x = 0; x < w; ++x) {
        if (da[x] >= 0) {
          out.distance.at(x, y) = static_cast<float>(std::sqrt(d[x]));
          out.nearest.at(x, y) = da[x];
        }
      }
    }
  }, 16);
  return out;
}

Mask innerContour(const Mask& region) {
  const int w = region.width();
  const int h = region.height();
  Mask out(w, h, 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!region.at(x, y)) continue;
      const bool edge = (x > 0 && !region.at(x - 1, y)) || (x + 1 < w && !region.at(x + 1, y)) ||
                        (y > 0 && !region.at(x, y - 1)) || (y + 1 < h && !region.at(x, y + 1));
      out.at(x, y) = edge ? 1 : 0;
    }
  }
  return out;
}

PlaneF signedDistance(const Mask& region) {
  const int w = region.width();
  const int h = region.height();
  Mask outside(w, h, 1, 0);
  for (std::size_t i = 0; i < region.pixelCount(); ++i) outside.data()[i] = region.data()[i] ? 0 : 1;
  const DistanceField toInside = distanceTransform(region);
  const DistanceField toOutside = distanceTransform(outside);
  PlaneF sd(w, h, 1, 0.0f);
  for (std::size_t i = 0; i < region.pixelCount(); ++i) {
    if (region.data()[i]) {
      sd.data()[i] = -(toOutside.distance.data()[i] - 0.5f);
    } else {
      sd.data()[i] = toInside.distance.data()[i] - 0.5f;
    }
  }
  return sd;
}

Mask dilate(const Mask& m, int radius) {
  if (radius <= 0) return m;
  const DistanceField df = distanceTransform(m);
  Mask out(m.width(), m.height(), 1, 0);
  const float r = static_cast<float>(radius) + 1e-3f;
  for (std::size_t i = 0; i < m.pixelCount(); ++i) out.data()[i] = df.distance.data()[i] <= r ? 1 : 0;
  return out;
}

}  // namespace cpsl
