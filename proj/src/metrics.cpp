#include "cpsl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "cpsl/distance.hpp"
#include "cpsl/errors.hpp"

namespace cpsl {

double luma(const float* rgb) { return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]; }

double psnr(const ImageF& a, const ImageF& b, const Mask* include) {
  if (!a.sameShape(b)) throw InputError("psnr: image shapes differ");
  if (include && !include->sameSize(a)) throw InputError("psnr: mask size differs");
  const int C = a.channels();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.pixelCount(); ++i) {
    if (include && !include->data()[i]) continue;
    for (int c = 0; c < C; ++c) {
      const double d = static_cast<double>(a.data()[i * C + c]) - b.data()[i * C + c];
      sum += d * d;
    }
    n += static_cast<std::size_t>(C);
  }
  if (n == 0 || sum == 0.0) return kPsnrIdentical;
  return std::min(kPsnrIdentical, 10.0 * std::log10(static_cast<double>(n) / sum));
}

double ssim(const ImageF& a, const ImageF& b) {
  if (!a.sameShape(b)) throw InputError("ssim: image shapes differ");
  const int w = a.width(), h = a.height(), C = a.channels();
  const int win = std::min({11, w, h});
  if (win <= 0) throw InputError("ssim: empty image");
  std::vector<double> g(static_cast<std::size_t>(win));
  double gs = 0.0;
  for (int i = 0; i < win; ++i) {
    const double d = i - (win - 1) / 2.0;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    gs += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= gs;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  // Separable Gaussian moments over valid windows.
  const int ow = w - win + 1, oh = h - win + 1;
  double total = 0.0;
  for (int c = 0; c < C; ++c) {
    std::vector<double> hx(static_cast<std::size_t>(ow) * h * 5, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < ow; ++x) {
        double m[5] = {0, 0, 0, 0, 0};
        for (int i = 0; i < win; ++i) {
          const double va = a.at(x + i, y, c), vb = b.at(x + i, y, c), gi = g[static_cast<std::size_t>(i)];
          m[0] += gi * va;
          m[1] += gi * vb;
          m[2] += gi * va * va;
          m[3] += gi * vb * vb;
          m[4] += gi * va * vb;
        }
        std::copy(m, m + 5, hx.begin() + (static_cast<std::ptrdiff_t>(y) * ow + x) * 5);
      }
    }
    double sum = 0.0;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double m[5] = {0, 0, 0, 0, 0};
        for (int i = 0; i < win; ++i) {
          const double* p = hx.data() + (static_cast<std::ptrdiff_t>(y + i) * ow + x) * 5;
          for (int j = 0; j < 5; ++j) m[j] += g[static_cast<std::size_t>(i)] * p[j];
        }
        const double mua = m[0], mub = m[1];
        const double va = m[2] - mua * mua, vb = m[3] - mub * mub, cov = m[4] - mua * mub;
        sum += ((2 * mua * mub + c1) * (2 * cov + c2)) / ((mua * mua + mub * mub + c1) * (va + vb + c2));
      }
    }
    total += sum / (static_cast<double>(ow) * oh);
  }
  return total / C;
}

double crackRate(const PlaneF& coverage, const Mask& band, float threshold) {
  if (!coverage.sameSize(band)) throw InputError("crackRate: band size differs");
  std::size_t n = 0, cracked = 0;
  for (std::size_t i = 0; i < band.pixelCount(); ++i) {
    if (!band.data()[i]) continue;
    ++n;
    if (coverage.data()[i] < threshold) ++cracked;
  }
  return n == 0 ? 0.0 : static_cast<double>(cracked) / static_cast<double>(n);
}

Mask alphaContour(const ImageF& rgba, int channel) {
  const int w = rgba.width(), h = rgba.height();
  Mask region(w, h, 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) region.at(x, y) = rgba.at(x, y, channel) >= 0.5f ? 1 : 0;
  }
  return innerContour(region);
}

Mask crackBand(std::span<const Layer> warped, int radius) {
  if (warped.empty()) return Mask();
  const int w = warped.front().width(), h = warped.front().height();
  Mask contours(w, h, 1, 0);
  for (std::size_t k = 0; k + 1 < warped.size(); ++k) {
    const Mask c = alphaContour(warped[k].rgba);
    for (std::size_t i = 0; i < c.pixelCount(); ++i) contours.data()[i] |= c.data()[i];
  }
  return dilate(contours, radius);
}

double chamferDistance(const Mask& a, const Mask& b) {
  if (!a.sameSize(b)) throw InputError("chamferDistance: sizes differ");
  std::size_t na = 0, nb = 0;
  for (auto v : a.data()) na += v != 0;
  for (auto v : b.data()) nb += v != 0;
  if (na == 0 && nb == 0) return 0.0;
  if (na == 0 || nb == 0) return std::hypot(a.width(), a.height());
  const DistanceField da = distanceTransform(a);
  const DistanceField db = distanceTransform(b);
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.pixelCount(); ++i) {
    if (a.data()[i]) sa += db.distance.data()[i];
    if (b.data()[i]) sb += da.distance.data()[i];
  }
  return 0.5 * (sa / static_cast<double>(na) + sb / static_cast<double>(nb));
}

double boundaryVarianceRaw(const std::vector<std::vector<PlaneF>>& stacks) {
  if (stacks.size() < 2) return 0.0;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 1; t < stacks.size(); ++t) {
    const std::size_t K = std::min(stacks[t].size(), stacks[t - 1].size());
    for (std::size_t k = 0; k < K; ++k) {
      sum += chamferDistance(alphaContour(stacks[t - 1][k], 0), alphaContour(stacks[t][k], 0));
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double boundaryVariance(const std::vector<std::vector<PlaneF>>& stacks,
                        const std::vector<std::vector<PlaneF>>& baseline) {
  const double base = boundaryVarianceRaw(baseline);
  if (!(base > 0.0)) return 0.0;
  return boundaryVarianceRaw(stacks) / base;
}

double flickerScore(const std::vector<ImageF>& frames, const std::vector<Mask>& bands) {
  if (frames.size() < 2) return 0.0;
  if (bands.size() != 1 && bands.size() != frames.size()) {
    throw InputError("flickerScore: need one band or one band per frame");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 1; t < frames.size(); ++t) {
    const ImageF& a = frames[t - 1];
    const ImageF& b = frames[t];
    if (!a.sameShape(b) || a.channels() < 3) throw InputError("flickerScore: frame shapes differ");
    const Mask& m0 = bands.size() == 1 ? bands[0] : bands[t - 1];
    const Mask& m1 = bands.size() == 1 ? bands[0] : bands[t];
    for (int y = 0; y < a.height(); ++y) {
      for (int x = 0; x < a.width(); ++x) {
        if (!m0.at(x, y) && !m1.at(x, y)) continue;
        sum += std::abs(luma(a.pixel(x, y)) - luma(b.pixel(x, y)));
        ++n;
      }
    }
  }
  return n == 0 ? 0.0 : std::clamp(sum / static_cast<double>(n), 0.0, 1.0);
}

void writeMetricsCsv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << "scene,method,angle,psnr,ssim,crack_rate\n";
  os << std::setprecision(6) << std::fixed;
  for (const auto& r : rows) {
    os << r.scene << ',' << r.method << ',' << r.angle << ',' << r.psnr << ',' << r.ssim << ','
       << r.crackRate << '\n';
  }
}

}  // namespace cpsl
