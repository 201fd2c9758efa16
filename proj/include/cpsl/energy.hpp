#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "cpsl/core.hpp"

namespace cpsl {

/// Per-frame inputs to decomposition: RGB in [0,1], metric depth, semantics.
struct FrameInputs {
  ImageF image;  // 3 channels
  DepthMap depth;
  SemanticMaps semantics;

  int width() const { return image.width(); }
  int height() const { return image.height(); }
};

struct EnergyParams {
  int K = 4;
  double lambdaB = 0.5;     // pairwise weight
  double alphaGrad = 10.0;  // color-gradient attenuation in the pairwise weight
  double betaSem = 2.0;     // semantic-edge attenuation in the pairwise weight
  double huberDelta = 0.0;  // <= 0 selects 0.1 * depth IQR
  double kappaSem = 0.2;    // semantic-mismatch penalty
  double kappaInst = 0.5;   // instance-split penalty
  int maxIters = 8;
  bool logisticSaliency = false;  // saliency weight: logistic instead of clamp

  void validate() const;
};

/// Per-label parameters the unary terms are measured against: representative
/// depth, majority semantic class, and the label owning each instance.
struct LayerModel {
  std::vector<double> depth;
  std::vector<std::int32_t> majorityClass;  // -1 for an empty label
  std::map<std::int32_t, int> instanceOwner;

  int labelCount() const { return static_cast<int>(depth.size()); }
};

struct LayerAssignment {
  PlaneI labels;  // 0-based layer index per pixel
  std::vector<double> representativeDepths;
  double energy = 0.0;

  int labelCount() const { return static_cast<int>(representativeDepths.size()); }
};

/// Huber penalty scaled to unit slope: r^2/(2 delta) inside, |r| - delta/2 outside.
double robustPenalty(double r, double delta);

/// 0.1 * interquartile range of the valid depths (floored to a small positive value).
double defaultHuberDelta(const DepthMap& depth);

/// Median depth, majority class and instance owners implied by `labels`.
/// Labels with no valid-depth pixel keep `fallbackDepth[k]` when provided.
LayerModel deriveModel(const PlaneI& labels, int K, const FrameInputs& in,
                       const std::vector<double>* fallbackDepth = nullptr);

/// Energy of `labels` measured against a fixed layer model.
double evaluateEnergy(const PlaneI& labels, const LayerModel& model, const FrameInputs& in,
                      const EnergyParams& params);

/// Energy with the model re-derived from the labels themselves.
double evaluateEnergy(const PlaneI& labels, const FrameInputs& in, const EnergyParams& params);

/// Initial labeling: depth quantiles of the valid pixels.
PlaneI quantileInitialization(const FrameInputs& in, int K, std::vector<double>* binDepths = nullptr);

/// Minimizes the layer-assignment energy. With `fixedModel` the layer model
/// is held constant (single exact cut for K = 2, expansion moves otherwise);
/// without it, label moves alternate with model re-estimation and the lowest
/// energy state is returned. Labels of the result are sorted so that
/// representative depths increase; empty labels are dropped.
/// Throws NoValidDepthError when the depth map has no valid pixel.
LayerAssignment solveAssignment(const FrameInputs& in, const EnergyParams& params,
                                const std::optional<LayerModel>& fixedModel = std::nullopt);

}  // namespace cpsl
