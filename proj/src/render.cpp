#include "cpsl/render.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>

#include "cpsl/errors.hpp"
#include "cpsl/parallel.hpp"
#include "kernels.hpp"

namespace cpsl {
namespace {

double msSince(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

constexpr int kBlock = 4;   // occupancy block (source px)
constexpr int kTile = 16;   // culling tile (target px)
constexpr int kSubTile = 8;  // contour search tile (target px)
constexpr int kMargin = 2;  // covers the bilinear footprint
constexpr float kEdgeSlack = 1e-2f;

// Sum of a block-table rectangle, inclusive block bounds.
int rectSum(const std::vector<int>& t, int bw, int bx0, int by0, int bx1, int by1) {
  const int s = bw + 1;
  return t[static_cast<std::size_t>((by1 + 1) * s + bx1 + 1)] - t[static_cast<std::size_t>(by0 * s + bx1 + 1)] -
         t[static_cast<std::size_t>((by1 + 1) * s + bx0)] + t[static_cast<std::size_t>(by0 * s + bx0)];
}

std::vector<int> prefixSums(const std::vector<std::uint8_t>& flags, int bw, int bh) {
  std::vector<int> t(static_cast<std::size_t>((bw + 1) * (bh + 1)), 0);
  for (int y = 0; y < bh; ++y) {
    int row = 0;
    for (int x = 0; x < bw; ++x) {
      row += flags[static_cast<std::size_t>(y * bw + x)];
      t[static_cast<std::size_t>((y + 1) * (bw + 1) + x + 1)] = t[static_cast<std::size_t>(y * (bw + 1) + x + 1)] + row;
    }
  }
  return t;
}

// Layers sampled through their homographies, gated by per-tile occupancy.
struct LazyView {
  const LayerSet& ls;
  const std::vector<Mat3>& H;
  const std::vector<std::uint64_t>& bits;
  int tilesX;
  Filter filter;

  int size() const { return static_cast<int>(ls.size()); }
  int width() const { return ls.width(); }
  int height() const { return ls.height(); }
  double depth(int k) const { return ls.layers[static_cast<std::size_t>(k)].depth; }
  bool active(int k, int x, int y) const {
    return (bits[static_cast<std::size_t>((y / kTile) * tilesX + x / kTile)] >> k) & 1u;
  }
  void pixel(int k, int x, int y, float out[4]) const {
    if (!active(k, x, y)) {
      out[0] = out[1] = out[2] = out[3] = 0.0f;
      return;
    }
    detail::sampleWarp(ls.layers[static_cast<std::size_t>(k)].rgba, H[static_cast<std::size_t>(k)], x, y, filter,
                       out);
  }
  float alpha(int k, int x, int y) const {
    if (!active(k, x, y)) return 0.0f;
    return detail::sampleWarpAlpha(ls.layers[static_cast<std::size_t>(k)].rgba, H[static_cast<std::size_t>(k)], x, y,
                                   filter);
  }
};

// Plain composite coverage with a summed-area table of hole pixels.
class PlainCoverage {
 public:
  PlainCoverage(const PlaneF& coverage, float holeCoverage) : cov_(coverage), w_(coverage.width()) {
    const int h = coverage.height();
    sat_.assign(static_cast<std::size_t>((w_ + 1) * (h + 1)), 0);
    for (int y = 0; y < h; ++y) {
      const float* c = coverage.row(y);
      int row = 0;
      for (int x = 0; x < w_; ++x) {
        row += c[x] < holeCoverage ? 1 : 0;
        sat_[static_cast<std::size_t>((y + 1) * (w_ + 1) + x + 1)] = sat_[static_cast<std::size_t>(y * (w_ + 1) + x + 1)] + row;
      }
    }
  }
  float at(int x, int y) const { return cov_.at(x, y); }
  bool anyHole(int x0, int y0, int x1, int y1) const { return rectSum(sat_, w_, x0, y0, x1, y1) > 0; }

 private:
  const PlaneF& cov_;
  int w_;
  std::vector<int> sat_;
};

}  // namespace

std::vector<Layer> warpLayers(const LayerSet& ls, const Camera& viewer, Filter filter) {
  std::vector<Layer> out(ls.size());
  const int w = ls.width();
  const int h = ls.height();
  for (std::size_t k = 0; k < ls.size(); ++k) {
    const PlaneHomography H = planeHomography(ls.sourceCamera, viewer, ls.layers[k].depth);
    out[k] = warpLayer(ls.layers[k], H, w, h, filter);
  }
  return out;
}

RenderResult renderView(const LayerSet& ls, const EdgeDepthCache& edc, const Camera& viewer,
                        const RenderParams& params) {
  if (ls.layers.empty()) throw InputError("cannot render an empty layer set");
  RenderResult r;
  auto t0 = std::chrono::steady_clock::now();
  r.warped = warpLayers(ls, viewer, params.filter);
  r.times.warpMs = msSince(t0);

  t0 = std::chrono::steady_clock::now();
  r.plain = composite(r.warped);
  r.times.compositeMs = msSince(t0);

  if (!params.dps || ls.size() < 2) {
    r.out = r.plain;
    r.strip.mask = Mask(ls.width(), ls.height(), 1, 0);
    return r;
  }
  t0 = std::chrono::steady_clock::now();
  const auto projected = projectEdgeDepthCache(edc, ls, ls.sourceCamera, viewer);
  r.silhouettes = detectSilhouettes(r.warped, projected, params.dpsParams);
  r.strip = buildStrip(r.silhouettes, r.warped, viewer, ls.sourceCamera, projected, params.dpsParams);
  r.out = applyStrip(r.plain, r.warped, r.strip);
  r.times.dpsMs = msSince(t0);
  return r;
}

FrameRenderer::FrameRenderer(const LayerSet& ls, const EdgeDepthCache& edc) : ls_(ls), edc_(edc) {
  if (ls.layers.empty()) throw InputError("cannot render an empty layer set");
  const auto t0 = std::chrono::steady_clock::now();
  const int w = ls.width();
  const int h = ls.height();
  const int bw = (w + kBlock - 1) / kBlock;
  const int bh = (h + kBlock - 1) / kBlock;
  occupancy_.resize(ls.size());
  parallelFor(0, static_cast<int>(ls.size()), [&](int k0, int k1) {
    std::vector<std::uint8_t> lo(static_cast<std::size_t>(w) * 3);
    for (int k = k0; k < k1; ++k) {
      const ImageF& A = ls.layers[static_cast<std::size_t>(k)].rgba;
      std::vector<std::uint8_t> any(static_cast<std::size_t>(bw * bh), 0), edge(any.size(), 0);
      // Horizontally dilated "below the crossing" flags of a row; outside counts as below.
      auto loRow = [&](int y, std::uint8_t* out) {
        for (int x = 0; x < w; ++x) {
          bool v = false;
          for (int dx = -1; dx <= 1 && !v; ++dx) {
            const int xx = x + dx;
            v = y < 0 || y >= h || xx < 0 || xx >= w || A.at(xx, y, 3) < 0.5f + kEdgeSlack;
          }
          out[x] = v;
        }
      };
      std::uint8_t* rows[3] = {lo.data(), lo.data() + w, lo.data() + 2 * w};
      loRow(-1, rows[0]);
      loRow(0, rows[1]);
      for (int y = 0; y < h; ++y) {
        loRow(y + 1, rows[2]);
        for (int x = 0; x < w; ++x) {
          const float a = A.at(x, y, 3);
          const std::size_t b = static_cast<std::size_t>((y / kBlock) * bw + x / kBlock);
          if (a > 0.0f) any[b] = 1;
          if (a >= 0.5f - kEdgeSlack && (rows[0][x] || rows[1][x] || rows[2][x])) edge[b] = 1;
        }
        std::rotate(rows, rows + 1, rows + 3);
      }
      Occupancy& o = occupancy_[static_cast<std::size_t>(k)];
      o.bw = bw;
      o.bh = bh;
      o.any = prefixSums(any, bw, bh);
      o.edge = prefixSums(edge, bw, bh);
    }
  }, 1);
  prepareMs_ = msSince(t0);
}

CompositeOutput FrameRenderer::render(const Camera& viewer, const RenderParams& params,
                                      StageTimes* times) const {
  CompositeOutput out;
  render(viewer, params, out, times);
  return out;
}

void FrameRenderer::render(const Camera& viewer, const RenderParams& params, CompositeOutput& out,
                           StageTimes* times) const {
  const int K = static_cast<int>(ls_.size());
  if (K > 64) {
    out = renderView(ls_, edc_, viewer, params).out;
    return;
  }
  const int w = ls_.width();
  const int h = ls_.height();
  auto t0 = std::chrono::steady_clock::now();

  std::vector<Mat3> H(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    H[static_cast<std::size_t>(k)] = planeHomography(ls_.sourceCamera, viewer, ls_.layers[static_cast<std::size_t>(k)].depth).H;
  }

  // Can layer k land anywhere in the target rectangle [x0, x1) x [y0, y1)
  // grown by one pixel, and can it put a 0.5 crossing there?
  struct Reach {
    bool any = false;
    bool edge = false;
  };
  auto reach = [&](int k, int x0, int y0, int x1, int y1) -> Reach {
    const Vec3 corners[4] = {{x0 - 1.0, y0 - 1.0, 1.0}, {double(x1), y0 - 1.0, 1.0},
                             {x0 - 1.0, double(y1), 1.0}, {double(x1), double(y1), 1.0}};
    double umin = std::numeric_limits<double>::infinity(), umax = -umin, vmin = umin, vmax = -umin;
    for (const Vec3& c : corners) {
      const Vec3 p = H[static_cast<std::size_t>(k)] * c;
      if (!(p.z() > 0.0)) return {true, true};
      umin = std::min(umin, p.x() / p.z());
      umax = std::max(umax, p.x() / p.z());
      vmin = std::min(vmin, p.y() / p.z());
      vmax = std::max(vmax, p.y() / p.z());
    }
    const double pu0 = std::max(std::floor(umin) - kMargin, 0.0), pu1 = std::min(std::ceil(umax) + kMargin, w - 1.0);
    const double pv0 = std::max(std::floor(vmin) - kMargin, 0.0), pv1 = std::min(std::ceil(vmax) + kMargin, h - 1.0);
    if (!(pu0 <= pu1 && pv0 <= pv1)) return {};
    const int bx0 = static_cast<int>(pu0) / kBlock, bx1 = static_cast<int>(pu1) / kBlock;
    const int by0 = static_cast<int>(pv0) / kBlock, by1 = static_cast<int>(pv1) / kBlock;
    const Occupancy& o = occupancy_[static_cast<std::size_t>(k)];
    return {rectSum(o.any, o.bw, bx0, by0, bx1, by1) > 0, rectSum(o.edge, o.bw, bx0, by0, bx1, by1) > 0};
  };

  const int tx = (w + kTile - 1) / kTile;
  const int ty = (h + kTile - 1) / kTile;
  std::vector<std::uint64_t> anyBits(static_cast<std::size_t>(tx * ty), 0), edgeBits(anyBits.size(), 0);
  parallelFor(0, ty, [&](int r0, int r1) {
    for (int j = r0; j < r1; ++j) {
      for (int i = 0; i < tx; ++i) {
        const int x1 = std::min((i + 1) * kTile, w), y1 = std::min((j + 1) * kTile, h);
        std::uint64_t any = 0, edge = 0;
        for (int k = 0; k < K; ++k) {
          const Reach r = reach(k, i * kTile, j * kTile, x1, y1);
          if (r.any) any |= std::uint64_t{1} << k;
          if (r.edge) edge |= std::uint64_t{1} << k;
        }
        anyBits[static_cast<std::size_t>(j * tx + i)] = any;
        edgeBits[static_cast<std::size_t>(j * tx + i)] = edge;
      }
    }
  }, 1);
  const LazyView V{ls_, H, anyBits, tx, params.filter};

  // Fused warp and front-to-back composite.
  if (!out.color.sameSize(w, h) || !out.coverage.sameSize(w, h) || !out.depthFront.sameSize(w, h)) {
    out = emptyComposite(w, h);
  }
  CompositeOutput& plain = out;
  parallelFor(0, ty, [&](int r0, int r1) {
    // Active layers per tile of the current tile row.
    std::vector<int> order(static_cast<std::size_t>(tx * K));
    std::vector<int> count(static_cast<std::size_t>(tx));
    for (int j = r0; j < r1; ++j) {
      for (int i = 0; i < tx; ++i) {
        const std::uint64_t bits = anyBits[static_cast<std::size_t>(j * tx + i)];
        int n = 0;
        for (int k = 0; k < K; ++k) {
          if ((bits >> k) & 1u) order[static_cast<std::size_t>(i * K + n++)] = k;
        }
        count[static_cast<std::size_t>(i)] = n;
      }
      // Row-major inside the tile row keeps few source rows in flight.
      for (int y = j * kTile; y < std::min((j + 1) * kTile, h); ++y) {
        float* col = plain.color.row(y);
        float* cov = plain.coverage.row(y);
        float* dep = plain.depthFront.row(y);
        for (int i = 0; i < tx; ++i) {
          const int n = count[static_cast<std::size_t>(i)];
          const int* ord = order.data() + static_cast<std::size_t>(i * K);
          for (int x = i * kTile; x < std::min((i + 1) * kTile, w); ++x) {
            float r = 0.0f, g = 0.0f, b = 0.0f;
            float T = 1.0f;
            float zf = std::numeric_limits<float>::infinity();
            for (int m = 0; m < n; ++m) {
              const int k = ord[m];
              float p[4];
              detail::sampleWarp(ls_.layers[static_cast<std::size_t>(k)].rgba, H[static_cast<std::size_t>(k)], x, y,
                                 params.filter, p);
              const float a = p[3];
              if (a <= 0.0f) continue;
              r += T * p[0];
              g += T * p[1];
              b += T * p[2];
              if (a > kVisibleAlpha && zf == std::numeric_limits<float>::infinity()) {
                zf = static_cast<float>(ls_.layers[static_cast<std::size_t>(k)].depth);
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
      }
    }
  }, 1);
  if (times) {
    times->warpMs = 0.0;
    times->compositeMs = msSince(t0);
    times->dpsMs = 0.0;
  }
  if (!params.dps || K < 2) return;

  t0 = std::chrono::steady_clock::now();
  const DpsParams& dp = params.dpsParams;
  const auto projected = projectEdgeDepthCache(edc_, ls_, ls_.sourceCamera, viewer);
  const detail::SampleGrid grid(projected, dp.rEdc);
  std::vector<SilhouettePixel> silhouettes;
  std::vector<float> tileAlpha(static_cast<std::size_t>((kSubTile + 2) * (kSubTile + 2)));
  for (int f = 0; f + 1 < K; ++f) {
    const std::size_t first = silhouettes.size();
    for (int j = 0; j < ty; ++j) {
      for (int i = 0; i < tx; ++i) {
        if (!((edgeBits[static_cast<std::size_t>(j * tx + i)] >> f) & 1u)) continue;
        for (int sj = j * kTile; sj < std::min((j + 1) * kTile, h); sj += kSubTile) {
          for (int si = i * kTile; si < std::min((i + 1) * kTile, w); si += kSubTile) {
            const int xEnd = std::min(si + kSubTile, w), yEnd = std::min(sj + kSubTile, h);
            if (!reach(f, si, sj, xEnd, yEnd).edge) continue;
            // Alpha of the sub-tile plus a one-pixel ring, then the contour pre-test.
            const int bx0 = std::max(si - 1, 0), by0 = std::max(sj - 1, 0);
            const int bx1 = std::min(xEnd, w - 1), by1 = std::min(yEnd, h - 1);
            const int bw = bx1 - bx0 + 1;
            for (int y = by0; y <= by1; ++y) {
              for (int x = bx0; x <= bx1; ++x) {
                tileAlpha[static_cast<std::size_t>((y - by0) * bw + x - bx0)] = V.alpha(f, x, y);
              }
            }
            auto A = [&](int x, int y) { return tileAlpha[static_cast<std::size_t>((y - by0) * bw + x - bx0)]; };
            for (int y = sj; y < yEnd; ++y) {
              for (int x = si; x < xEnd; ++x) {
                if (A(x, y) < 0.5f) continue;
                const bool contour = (x > 0 && A(x - 1, y) < 0.5f) || (x + 1 < w && A(x + 1, y) < 0.5f) ||
                                     (y > 0 && A(x, y - 1) < 0.5f) || (y + 1 < h && A(x, y + 1) < 0.5f);
                if (!contour) continue;
                if (auto sp = detail::silhouetteAt(V, f, x, y, dp, grid)) silhouettes.push_back(*sp);
              }
            }
          }
        }
      }
    }
    // Same order as a raster scan.
    std::sort(silhouettes.begin() + static_cast<std::ptrdiff_t>(first), silhouettes.end(),
              [](const SilhouettePixel& a, const SilhouettePixel& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  }
  PlainCoverage coverage(plain.coverage, dp.holeCoverage);
  StripBand& strip = strip_;
  detail::buildStripInto(silhouettes, V, coverage, viewer, ls_.sourceCamera, projected, dp, strip, best_, &touched_);
  // Each band pixel reads only its own composite value, so repair in place.
  for (int i : touched_) detail::repairPixel(plain, V, strip, i % w, i / w, out);
  detail::clearStrip(strip_, best_, touched_);
  if (times) times->dpsMs = msSince(t0);
}

double sceneMedianDepth(const LayerSet& ls) {
  std::vector<std::pair<double, double>> weighted;
  double total = 0.0;
  for (const Layer& L : ls.layers) {
    double area = 0.0;
    for (std::size_t i = 3; i < L.rgba.storage().size(); i += 4) area += L.rgba.storage()[i];
    weighted.emplace_back(L.depth, area);
    total += area;
  }
  if (weighted.empty()) return 1.0;
  if (!(total > 0.0)) return weighted.front().first;
  double acc = 0.0;
  for (const auto& [z, a] : weighted) {
    acc += a;
    if (acc >= 0.5 * total) return z;
  }
  return weighted.back().first;
}

}  // namespace cpsl
