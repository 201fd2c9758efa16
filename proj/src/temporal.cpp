#include "cpsl/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cpsl/compositor.hpp"
#include "cpsl/distance.hpp"
#include "cpsl/errors.hpp"
#include "cpsl/metrics.hpp"
#include "cpsl/parallel.hpp"

namespace cpsl {
namespace {

Mask opaqueMask(const ImageF& rgba) {
  Mask m(rgba.width(), rgba.height(), 1, 0);
  for (std::size_t i = 0; i < m.pixelCount(); ++i) m.data()[i] = rgba.data()[i * 4 + 3] >= 0.5f ? 1 : 0;
  return m;
}

PlaneF alphaPlane(const ImageF& rgba) {
  PlaneF a(rgba.width(), rgba.height(), 1, 0.0f);
  for (std::size_t i = 0; i < a.pixelCount(); ++i) a.data()[i] = rgba.data()[i * 4 + 3];
  return a;
}

Mask contourOf(const PlaneF& alpha) {
  Mask region(alpha.width(), alpha.height(), 1, 0);
  for (std::size_t i = 0; i < region.pixelCount(); ++i) region.data()[i] = alpha.data()[i] >= 0.5f;
  return innerContour(region);
}

std::vector<int> greedyMatch(const std::vector<Mask>& prev, const std::vector<Mask>& next) {
  struct Pair {
    double iou;
    int p, n;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < prev.size(); ++p) {
    for (std::size_t n = 0; n < next.size(); ++n) {
      const double iou = maskIoU(prev[p], next[n]);
      if (iou > 0.0) pairs.push_back({iou, static_cast<int>(p), static_cast<int>(n)});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.p != b.p) return a.p < b.p;
    return a.n < b.n;
  });
  std::vector<int> out(prev.size(), -1);
  std::vector<bool> used(next.size(), false);
  for (const Pair& q : pairs) {
    if (out[static_cast<std::size_t>(q.p)] >= 0 || used[static_cast<std::size_t>(q.n)]) continue;
    out[static_cast<std::size_t>(q.p)] = q.n;
    used[static_cast<std::size_t>(q.n)] = true;
  }
  return out;
}

void checkMotion(const MotionField& motion, int w, int h) {
  if (motion.width() != w || motion.height() != h || motion.flow.channels() != 2) {
    throw InputError("motion field size does not match the frame");
  }
}

struct Tracked {
  Layer layer;
  double confidence = 1.0;
  int missed = 0;
};

}  // namespace

void GopParams::validate() const {
  if (iouThresh < 0.0 || iouThresh > 1.0 || crackThresh < 0.0 || crackThresh > 1.0) {
    throw InvariantError("GOP thresholds must lie in [0,1]");
  }
  if (ema < 0.0 || ema > 1.0 || emaBoundary < 0.0 || emaBoundary > 1.0) {
    throw InvariantError("GOP EMA weights must lie in [0,1]");
  }
  if (maxGop < 1 || hysteresis < 1 || patience < 1) {
    throw InvariantError("GOP length, hysteresis and patience must be >= 1");
  }
}

MotionField MotionField::zero(int width, int height) {
  return MotionField{PlaneF(width, height, 2, 0.0f)};
}

MotionField MotionField::constant(int width, int height, double dx, double dy) {
  MotionField m = zero(width, height);
  for (std::size_t i = 0; i < m.flow.pixelCount(); ++i) {
    m.flow.data()[2 * i] = static_cast<float>(dx);
    m.flow.data()[2 * i + 1] = static_cast<float>(dy);
  }
  return m;
}

MotionField blockMatch(const ImageF& prev, const ImageF& next, int block, int range) {
  if (!prev.sameShape(next) || prev.channels() < 3) throw InputError("blockMatch: frame shapes differ");
  if (block < 1 || range < 0) throw InputError("blockMatch: bad block size or range");
  const int w = prev.width(), h = prev.height();
  PlaneF lp(w, h, 1), ln(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      lp.at(x, y) = static_cast<float>(luma(prev.pixel(x, y)));
      ln.at(x, y) = static_cast<float>(luma(next.pixel(x, y)));
    }
  }
  std::vector<std::pair<int, int>> candidates;
  for (int dy = -range; dy <= range; ++dy) {
    for (int dx = -range; dx <= range; ++dx) candidates.emplace_back(dx, dy);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](auto a, auto b) {
    return a.first * a.first + a.second * a.second < b.first * b.first + b.second * b.second;
  });

  MotionField m = MotionField::zero(w, h);
  const int bw = (w + block - 1) / block, bh = (h + block - 1) / block;
  parallelFor(0, bw * bh, [&](int b0, int b1) {
    for (int b = b0; b < b1; ++b) {
      const int x0 = (b % bw) * block, y0 = (b / bw) * block;
      const int x1 = std::min(w, x0 + block), y1 = std::min(h, y0 + block);
      const int area = (x1 - x0) * (y1 - y0);
      double best = std::numeric_limits<double>::infinity();
      std::pair<int, int> bestD{0, 0};
      for (auto [dx, dy] : candidates) {
        double sad = 0.0;
        int n = 0;
        for (int y = y0; y < y1; ++y) {
          const int sy = y - dy;
          if (sy < 0 || sy >= h) continue;
          for (int x = x0; x < x1; ++x) {
            const int sx = x - dx;
            if (sx < 0 || sx >= w) continue;
            sad += std::abs(ln.at(x, y) - lp.at(sx, sy));
            ++n;
          }
        }
        if (2 * n < area) continue;
        const double mad = sad / n;
        if (mad < best) {
          best = mad;
          bestD = {dx, dy};
        }
      }
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          m.flow.at(x, y, 0) = static_cast<float>(bestD.first);
          m.flow.at(x, y, 1) = static_cast<float>(bestD.second);
        }
      }
    }
  });
  return m;
}

ImageF advect(const ImageF& img, const MotionField& motion) {
  checkMotion(motion, img.width(), img.height());
  const int w = img.width(), h = img.height(), C = img.channels();
  ImageF out(w, h, C, 0.0f);
  parallelFor(0, h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const double u = x - static_cast<double>(motion.flow.at(x, y, 0));
        const double v = y - static_cast<double>(motion.flow.at(x, y, 1));
        if (!(u > -1.0 && v > -1.0 && u < w && v < h)) continue;
        const int ix = static_cast<int>(std::floor(u)), iy = static_cast<int>(std::floor(v));
        const float fx = static_cast<float>(u - ix), fy = static_cast<float>(v - iy);
        const float wt[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
        const int tx[4] = {ix, ix + 1, ix, ix + 1}, ty[4] = {iy, iy, iy + 1, iy + 1};
        float* o = out.pixel(x, y);
        for (int t = 0; t < 4; ++t) {
          if (wt[t] == 0.0f || !img.inside(tx[t], ty[t])) continue;
          const float* s = img.pixel(tx[t], ty[t]);
          for (int c = 0; c < C; ++c) o[c] += wt[t] * s[c];
        }
      }
    }
  }, 8);
  return out;
}

double maskIoU(const Mask& a, const Mask& b) {
  if (!a.sameSize(b)) throw InputError("maskIoU: sizes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.pixelCount(); ++i) {
    const bool pa = a.data()[i] != 0, pb = b.data()[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double boundarySimilarity(const Mask& a, const Mask& b) {
  const double diag = std::hypot(a.width(), a.height());
  return std::clamp(1.0 - chamferDistance(a, b) / (0.01 * diag), 0.0, 1.0);
}

std::vector<int> associateInstances(const LayerSet& prev, const std::vector<Mask>& nextMasks,
                                    const MotionField& motion) {
  std::vector<Mask> advected;
  for (const Layer& L : prev.layers) advected.push_back(opaqueMask(advect(L.rgba, motion)));
  return greedyMatch(advected, nextMasks);
}

PlaneF smoothBoundaries(const PlaneF& prevAdvected, const PlaneF& next, const PlaneF& stability,
                        double emaBoundary, double band) {
  if (!prevAdvected.sameShape(next) || !stability.sameSize(next)) {
    throw InputError("smoothBoundaries: sizes differ");
  }
  Mask contours = contourOf(prevAdvected);
  const Mask c2 = contourOf(next);
  for (std::size_t i = 0; i < contours.pixelCount(); ++i) contours.data()[i] |= c2.data()[i];
  const DistanceField df = distanceTransform(contours);
  PlaneF out = next;
  for (std::size_t i = 0; i < out.pixelCount(); ++i) {
    if (!(df.distance.data()[i] <= band)) continue;
    const double eb = 1.0 - (1.0 - emaBoundary) * std::clamp(stability.data()[i], 0.0f, 1.0f);
    out.data()[i] = static_cast<float>(eb * prevAdvected.data()[i] + (1.0 - eb) * next.data()[i]);
  }
  return out;
}

bool refreshTriggered(double meanIoU, double crackRate, const GopParams& params) {
  return meanIoU < params.iouThresh || crackRate > params.crackThresh;
}

GopState startGop(const FrameInputs& in, const Camera& camera, int frameIndex,
                  const DecomposeParams& decompose, const GopParams& params) {
  params.validate();
  DecomposedFrame d = decomposeFrame(in, camera, frameIndex, decompose);
  GopState s;
  s.params = params;
  s.anchor = d.layers;
  s.current = std::move(d.layers);
  s.edc = std::move(d.edc);
  s.confidences.assign(s.current.size(), 1.0);
  s.missed.assign(s.current.size(), 0);
  return s;
}

PropagationReport propagate(GopState& state, const FrameInputs& in, const MotionField& motion,
                            int frameIndex, const DecomposeParams& decompose) {
  const GopParams& P = state.params;
  const int w = in.width(), h = in.height();
  checkMotion(motion, w, h);
  if (state.current.width() != w || state.current.height() != h) {
    throw InputError("frame size differs from the GOP");
  }
  const Camera camera = state.current.sourceCamera;
  const std::size_t K = state.current.size();

  std::vector<Layer> advected(K);
  std::vector<Mask> advMasks(K);
  for (std::size_t k = 0; k < K; ++k) {
    advected[k] = state.current.layers[k];
    advected[k].rgba = advect(state.current.layers[k].rgba, motion);
    advMasks[k] = opaqueMask(advected[k].rgba);
  }

  DecomposedFrame det = decomposeFrame(in, camera, frameIndex, decompose);
  std::vector<Mask> detMasks;
  for (const Layer& L : det.layers.layers) detMasks.push_back(opaqueMask(L.rgba));
  const std::vector<int> match = greedyMatch(advMasks, detMasks);

  PropagationReport rep;
  double iouSum = 0.0;
  std::vector<double> conf(K);
  for (std::size_t k = 0; k < K; ++k) {
    double iou = 0.0, bsim = 0.0;
    if (match[k] >= 0) {
      const Mask& m = detMasks[static_cast<std::size_t>(match[k])];
      iou = maskIoU(advMasks[k], m);
      bsim = boundarySimilarity(innerContour(advMasks[k]), innerContour(m));
    }
    iouSum += iou;
    conf[k] = std::clamp(P.ema * state.confidences[k] + (1.0 - P.ema) * (0.5 * iou + 0.5 * bsim), 0.0, 1.0);
  }
  rep.meanIoU = K == 0 ? 1.0 : iouSum / static_cast<double>(K);

  // Cracks opened by advection, measured at the source pose.
  {
    const CompositeOutput comp = composite(advected);
    Mask band(w, h, 1, 0);
    for (std::size_t k = 0; k + 1 < K; ++k) {
      const Mask c = innerContour(advMasks[k]);
      for (std::size_t i = 0; i < band.pixelCount(); ++i) band.data()[i] |= c.data()[i];
    }
    rep.crackRate = crackRate(comp, dilate(band, kCrackDilation));
  }

  rep.triggered = refreshTriggered(rep.meanIoU, rep.crackRate, P);
  state.triggerStreak = rep.triggered ? state.triggerStreak + 1 : 0;
  bool refresh = P.refresh && (state.framesSinceI + 1 >= P.maxGop || state.triggerStreak >= P.hysteresis);

  std::vector<Tracked> tracked;
  if (!refresh) {
    std::vector<bool> used(det.layers.size(), false);
    for (std::size_t k = 0; k < K; ++k) {
      Tracked t{advected[k], conf[k], 0};
      if (match[k] < 0) {
        t.missed = state.missed[k] + 1;
        if (t.missed >= P.patience) continue;
        tracked.push_back(std::move(t));
        continue;
      }
      const Layer& D = det.layers.layers[static_cast<std::size_t>(match[k])];
      used[static_cast<std::size_t>(match[k])] = true;
      const PlaneF aAdv = alphaPlane(advected[k].rgba);
      const PlaneF aSmooth = smoothBoundaries(aAdv, alphaPlane(D.rgba), in.depth.stability, P.emaBoundary,
                                              2.0 * decompose.matte.w0);
      // Re-matte the smoothed support so its edge keeps the feather profile.
      Mask support(w, h, 1, 0);
      for (std::size_t i = 0; i < support.pixelCount(); ++i) support.data()[i] = aSmooth.data()[i] >= 0.5f;
      const PlaneF aNew = featherMatte(support, in.depth, decompose.matte);
      ImageF& rgba = t.layer.rgba;
      for (std::size_t i = 0; i < aAdv.pixelCount(); ++i) {
        float* p = rgba.data().data() + i * 4;
        float a = aAdv.data()[i];
        if (std::abs(aNew.data()[i] - a) > P.restructure) {
          a = aNew.data()[i];
          ++rep.rematted;
        }
        // Visible in the new frame: refresh color from it; else keep the advected color.
        float c[3];
        if (D.rgba.data()[i * 4 + 3] > 0.0f) {
          for (int j = 0; j < 3; ++j) c[j] = in.image.data()[i * 3 + j];
        } else {
          for (int j = 0; j < 3; ++j) c[j] = p[3] > 0.0f ? std::min(1.0f, p[j] / p[3]) : 0.0f;
        }
        for (int j = 0; j < 3; ++j) p[j] = a * c[j];
        p[3] = a;
      }
      t.layer.depth = P.ema * advected[k].depth + (1.0 - P.ema) * D.depth;
      t.layer.saliencyScore = D.saliencyScore;
      t.layer.instanceIds.insert(D.instanceIds.begin(), D.instanceIds.end());
      tracked.push_back(std::move(t));
    }
    for (std::size_t n = 0; n < det.layers.size(); ++n) {
      if (!used[n]) tracked.push_back({det.layers.layers[n], 1.0, 0});
    }
    std::stable_sort(tracked.begin(), tracked.end(),
                     [](const Tracked& a, const Tracked& b) { return a.layer.depth < b.layer.depth; });
    for (std::size_t i = 1; i < tracked.size(); ++i) {
      if (!(tracked[i].layer.depth > tracked[i - 1].layer.depth)) {
        tracked[i].layer.depth = std::nextafter(tracked[i - 1].layer.depth, 1e300);
      }
    }
    if (tracked.empty() || static_cast<int>(tracked.size()) > decompose.maxLayers) refresh = true;
  }

  if (!refresh && tracked.size() >= 2) {
    // Per-layer smoothing can leave seams between layers: the farthest layer
    // takes up whatever coverage the re-detected frame has there.
    const CompositeOutput target = composite(det.layers.layers);
    std::vector<Layer> front;
    for (std::size_t k = 0; k + 1 < tracked.size(); ++k) front.push_back(tracked[k].layer);
    const CompositeOutput nearer = composite(front);
    ImageF& back = tracked.back().layer.rgba;
    const ImageF source = back;
    const DistanceField nearestOpaque = distanceTransform(opaqueMask(source));
    for (std::size_t i = 0; i < back.pixelCount(); ++i) {
      float* p = back.data().data() + i * 4;
      const float c = nearer.coverage.data()[i];
      const float goal = target.coverage.data()[i];
      if (c >= 1.0f || 1.0f - (1.0f - c) * (1.0f - p[3]) >= goal) continue;
      const float a = std::clamp((goal - c) / (1.0f - c), p[3], 1.0f);
      // Extend the layer's own color rather than the front surface seen here.
      const int n = nearestOpaque.nearest.data()[i];
      const float* q = n >= 0 ? source.data().data() + static_cast<std::size_t>(n) * 4 : nullptr;
      for (int j = 0; j < 3; ++j) {
        p[j] = q ? a * q[j] / q[3] : a * in.image.data()[i * 3 + static_cast<std::size_t>(j)];
      }
      p[3] = a;
    }
  }

  if (refresh) {
    rep.decision = FrameType::I;
    state.anchor = det.layers;
    state.current = std::move(det.layers);
    state.edc = std::move(det.edc);
    state.confidences.assign(state.current.size(), 1.0);
    state.missed.assign(state.current.size(), 0);
    state.framesSinceI = 0;
    state.triggerStreak = 0;
    rep.rematted = 0;
    return rep;
  }

  std::vector<Layer> layers;
  state.confidences.clear();
  state.missed.clear();
  for (Tracked& t : tracked) {
    t.layer.confidence = t.confidence;
    state.confidences.push_back(t.confidence);
    state.missed.push_back(t.missed);
    layers.push_back(std::move(t.layer));
  }
  state.current = makeLayerSet(std::move(layers), frameIndex, camera, decompose.maxLayers);
  state.edc = buildEdgeDepthCache(state.current, in.depth, decompose.quantizer);
  ++state.framesSinceI;
  rep.decision = FrameType::P;
  return rep;
}

std::vector<SequenceFrame> processSequence(const std::vector<FrameInputs>& frames,
                                           const std::vector<MotionField>& motions,
                                           const Camera& camera, const DecomposeParams& decompose,
                                           const GopParams& params, bool temporal) {
  std::vector<SequenceFrame> out;
  if (frames.empty()) return out;
  if (!motions.empty() && motions.size() != frames.size()) {
    throw InputError("need one motion field per frame");
  }
  if (!temporal) {
    for (std::size_t t = 0; t < frames.size(); ++t) {
      DecomposedFrame d = decomposeFrame(frames[t], camera, static_cast<int>(t), decompose);
      out.push_back({std::move(d.layers), std::move(d.edc), FrameType::I, {}});
      out.back().confidences.assign(out.back().layers.size(), 1.0);
    }
    return out;
  }
  GopState state = startGop(frames[0], camera, 0, decompose, params);
  out.push_back({state.current, state.edc, FrameType::I, state.confidences});
  for (std::size_t t = 1; t < frames.size(); ++t) {
    const MotionField m = motions.empty() ? blockMatch(frames[t - 1].image, frames[t].image) : motions[t];
    const PropagationReport rep = propagate(state, frames[t], m, static_cast<int>(t), decompose);
    out.push_back({state.current, state.edc, rep.decision, state.confidences});
  }
  return out;
}

}  // namespace cpsl
