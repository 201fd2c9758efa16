#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cpsl/compositor.hpp"
#include "cpsl/image.hpp"

namespace cpsl {

inline constexpr double kPsnrIdentical = 99.0;
inline constexpr float kCrackCoverage = 0.98f;
inline constexpr int kCrackDilation = 3;

/// 10 log10(1 / MSE) over all channels of [0,1] images. Identical images
/// report kPsnrIdentical. With `include`, only pixels where it is set count.
double psnr(const ImageF& a, const ImageF& b, const Mask* include = nullptr);

/// Mean structural similarity, 11x11 Gaussian window (sigma 1.5), k1 = 0.01,
/// k2 = 0.03, dynamic range 1. Channels are scored separately and averaged.
/// Only windows fully inside the image are used.
double ssim(const ImageF& a, const ImageF& b);

/// Fraction of band pixels whose coverage is below `threshold`.
double crackRate(const PlaneF& coverage, const Mask& band, float threshold = kCrackCoverage);
inline double crackRate(const CompositeOutput& out, const Mask& band,
                        float threshold = kCrackCoverage) {
  return crackRate(out.coverage, band, threshold);
}

/// Pixels with alpha >= 0.5 that touch a 4-neighbour below 0.5.
Mask alphaContour(const ImageF& rgba, int channel = 3);

/// Pixels within `radius` of the 0.5 contour of any warped layer except the
/// last (farthest) one. Independent of crack repair, so runs with and
/// without it are scored on the same pixels.
Mask crackBand(std::span<const Layer> warped, int radius = kCrackDilation);

/// Mean symmetric chamfer distance between two contour masks. 0 when both are
/// empty; the image diagonal when exactly one is.
double chamferDistance(const Mask& a, const Mask& b);

/// Mean over consecutive frame pairs (and over layers) of the chamfer
/// distance between 0.5 contours. `stacks[t][k]` is layer k's alpha at t.
double boundaryVarianceRaw(const std::vector<std::vector<PlaneF>>& stacks);

/// boundaryVarianceRaw(stacks) / boundaryVarianceRaw(baseline); 0 when the
/// baseline is static.
double boundaryVariance(const std::vector<std::vector<PlaneF>>& stacks,
                        const std::vector<std::vector<PlaneF>>& baseline);

/// Mean absolute luma difference between consecutive frames over band pixels.
/// `bands` holds one mask for all frames or one per frame; a pair uses the
/// union of its two bands.
double flickerScore(const std::vector<ImageF>& frames, const std::vector<Mask>& bands);

double luma(const float* rgb);

struct MetricsRow {
  std::string scene;
  std::string method;
  double angle = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double crackRate = 0.0;
};

void writeMetricsCsv(std::ostream& os, const std::vector<MetricsRow>& rows);

}  // namespace cpsl
