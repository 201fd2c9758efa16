#pragma once

#include <vector>

#include "cpsl/core.hpp"
#include "cpsl/layergen.hpp"

namespace cpsl {

struct GopParams {
  double iouThresh = 0.6;
  double crackThresh = 0.1;
  double ema = 0.8;          // confidence EMA weight on the previous value
  double emaBoundary = 0.6;  // boundary matte EMA weight on the advected matte
  int maxGop = 30;
  int hysteresis = 2;        // consecutive triggered frames before a refresh
  int patience = 2;          // frames an unmatched layer survives
  double restructure = 0.1;  // |delta alpha| above which a pixel is re-matted
  bool refresh = true;       // false: never refresh after the opening I-frame

  void validate() const;
};

/// Forward displacement from the previous frame to the next one, per pixel
/// (2 channels: dx, dy). next(x) ~ prev(x - flow(x)).
struct MotionField {
  PlaneF flow;

  int width() const { return flow.width(); }
  int height() const { return flow.height(); }

  static MotionField zero(int width, int height);
  static MotionField constant(int width, int height, double dx, double dy);
};

/// Exhaustive block matching on luma: blocks of `block` px searched over
/// +/- `range` px by sum of absolute differences. Ties keep the smaller
/// displacement, so flat regions report zero motion.
MotionField blockMatch(const ImageF& prev, const ImageF& next, int block = 16, int range = 8);

/// Pulls every channel of `img` along the motion: out(x) = img(x - flow(x)),
/// bilinear, transparent/zero outside.
ImageF advect(const ImageF& img, const MotionField& motion);

double maskIoU(const Mask& a, const Mask& b);

/// 1 - (mean symmetric chamfer distance / (0.01 * diagonal)), clamped to [0,1].
double boundarySimilarity(const Mask& a, const Mask& b);

/// Greedy max-IoU matching of the advected previous layers (alpha >= 0.5)
/// against the next frame's masks. result[k] is the matched mask index or -1;
/// every mask is used at most once. Ties prefer lower indices.
std::vector<int> associateInstances(const LayerSet& prev, const std::vector<Mask>& nextMasks,
                                    const MotionField& motion);

/// Near the contours of either matte (within `band` px) blends
/// alpha = eb * prev + (1 - eb) * next, where eb = 1 - (1 - emaBoundary) *
/// stability; elsewhere returns `next`.
PlaneF smoothBoundaries(const PlaneF& prevAdvected, const PlaneF& next, const PlaneF& stability,
                        double emaBoundary, double band);

enum class FrameType { I, P };

struct GopState {
  LayerSet anchor;
  LayerSet current;
  EdgeDepthCache edc;
  std::vector<double> confidences;
  std::vector<int> missed;  // consecutive unmatched frames per layer
  int framesSinceI = 0;
  int triggerStreak = 0;
  GopParams params;
};

struct PropagationReport {
  FrameType decision = FrameType::P;
  double meanIoU = 1.0;
  double crackRate = 0.0;
  bool triggered = false;
  std::size_t rematted = 0;  // pixels whose matte was rewritten
};

/// Starts a GOP: full decomposition of the frame.
GopState startGop(const FrameInputs& in, const Camera& camera, int frameIndex,
                  const DecomposeParams& decompose, const GopParams& params);

/// Advances the GOP by one frame. Throws InputError when the motion field
/// does not match the frame size.
PropagationReport propagate(GopState& state, const FrameInputs& in, const MotionField& motion,
                            int frameIndex, const DecomposeParams& decompose);

/// Pure refresh decision for the given measurements.
bool refreshTriggered(double meanIoU, double crackRate, const GopParams& params);

struct SequenceFrame {
  LayerSet layers;
  EdgeDepthCache edc;
  FrameType type = FrameType::I;
  std::vector<double> confidences;
};

/// Runs a whole sequence. `motions[t]` describes frame t-1 -> t (motions[0]
/// is ignored); an empty vector selects block matching. `temporal = false`
/// decomposes every frame independently (the frame-wise baseline).
std::vector<SequenceFrame> processSequence(const std::vector<FrameInputs>& frames,
                                           const std::vector<MotionField>& motions,
                                           const Camera& camera, const DecomposeParams& decompose,
                                           const GopParams& params, bool temporal = true);

}  // namespace cpsl
