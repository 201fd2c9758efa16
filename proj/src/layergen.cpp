#include "cpsl/layergen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "cpsl/errors.hpp"

namespace cpsl {
namespace {

double medianDepth(const std::vector<std::size_t>& px, const DepthMap& depth) {
  std::vector<float> d;
  d.reserve(px.size());
  for (std::size_t i : px) {
    if (depth.valid.data()[i]) d.push_back(depth.values.data()[i]);
  }
  if (d.empty()) return 0.0;
  const std::size_t mid = (d.size() - 1) / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  return d[mid];
}

double gradientMagnitude(const ImageF& img, std::size_t i) {
  const int w = img.width();
  const int h = img.height();
  const int x = static_cast<int>(i % w);
  const int y = static_cast<int>(i / w);
  double g = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double gx = img.at(std::min(x + 1, w - 1), y, c) - img.at(std::max(x - 1, 0), y, c);
    const double gy = img.at(x, std::min(y + 1, h - 1), c) - img.at(x, std::max(y - 1, 0), c);
    g += 0.25 * (gx * gx + gy * gy);
  }
  return std::sqrt(g);
}

struct Region {
  std::vector<std::size_t> pixels;
  double depth = 0.0;
  std::set<std::int32_t> instances;
};

}  // namespace

std::vector<std::pair<std::int32_t, double>> instanceScores(const SemanticMaps& sem) {
  std::map<std::int32_t, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < sem.instance.pixelCount(); ++i) {
    const std::int32_t id = sem.instance.data()[i];
    if (id == 0) continue;
    auto& [sum, area] = acc[id];
    sum += sem.saliency.data()[i];
    ++area;
  }
  std::size_t maxArea = 0;
  for (const auto& [id, v] : acc) maxArea = std::max(maxArea, v.second);
  std::vector<std::pair<std::int32_t, double>> out;
  for (const auto& [id, v] : acc) {
    const double meanSal = v.first / static_cast<double>(v.second);
    const double normArea = static_cast<double>(v.second) / static_cast<double>(maxArea);
    out.emplace_back(id, meanSal * normArea);
  }
  return out;
}

double mergeCost(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                 const FrameInputs& in, double textureWeight) {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  auto addDepth = [&](const std::vector<std::size_t>& px) {
    for (std::size_t i : px) {
      if (!in.depth.valid.data()[i]) continue;
      const double z = in.depth.values.data()[i];
      sum += z;
      sum2 += z * z;
      ++n;
    }
  };
  addDepth(a);
  addDepth(b);
  const double variance = n > 0 ? std::max(0.0, sum2 / n - (sum / n) * (sum / n)) : 0.0;

  auto stats = [&](const std::vector<std::size_t>& px, double color[3], double& grad) {
    color[0] = color[1] = color[2] = 0.0;
    grad = 0.0;
    if (px.empty()) return;
    for (std::size_t i : px) {
      for (int c = 0; c < 3; ++c) color[c] += in.image.data()[i * 3 + c];
      grad += gradientMagnitude(in.image, i);
    }
    for (int c = 0; c < 3; ++c) color[c] /= static_cast<double>(px.size());
    grad /= static_cast<double>(px.size());
  };
  double ca[3], cb[3], ga = 0.0, gb = 0.0;
  stats(a, ca, ga);
  stats(b, cb, gb);
  const double colorDist = std::sqrt((ca[0] - cb[0]) * (ca[0] - cb[0]) + (ca[1] - cb[1]) * (ca[1] - cb[1]) +
                                     (ca[2] - cb[2]) * (ca[2] - cb[2]));
  return variance + textureWeight * (colorDist + std::abs(ga - gb));
}

GroupedAssignment promoteAndMerge(const LayerAssignment& assign, const FrameInputs& in,
                                  const PromotionParams& params, int layerBudget) {
  if (layerBudget < 1) throw BudgetInfeasibleError("layer budget must be at least 1");
  const SemanticMaps& sem = in.semantics;
  const std::size_t n = assign.labels.pixelCount();

  std::map<std::int32_t, double> promotedScore;
  for (const auto& [id, score] : instanceScores(sem)) {
    if (score > params.thetaPromote) promotedScore[id] = score;
  }
  if (static_cast<int>(promotedScore.size()) > layerBudget) {
    throw BudgetInfeasibleError("layer budget " + std::to_string(layerBudget) + " below " +
                                std::to_string(promotedScore.size()) + " promoted instances");
  }

  std::map<std::int32_t, Region> promoted;
  std::vector<Region> background(static_cast<std::size_t>(std::max(1, assign.labelCount())));
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t id = sem.instance.data()[i];
    if (id != 0 && promotedScore.count(id)) {
      promoted[id].pixels.push_back(i);
      continue;
    }
    Region& r = background[static_cast<std::size_t>(assign.labels.data()[i])];
    r.pixels.push_back(i);
    if (id != 0) r.instances.insert(id);
  }
  std::erase_if(background, [](const Region& r) { return r.pixels.empty(); });
  for (auto& r : background) r.depth = medianDepth(r.pixels, in.depth);
  std::stable_sort(background.begin(), background.end(),
                   [](const Region& a, const Region& b) { return a.depth < b.depth; });

  const int promotedCount = static_cast<int>(promoted.size());
  if (!background.empty() && promotedCount >= layerBudget) {
    throw BudgetInfeasibleError("layer budget leaves no room for the background");
  }

  // Greedy merging of depth-adjacent background regions.
  while (promotedCount + static_cast<int>(background.size()) > layerBudget) {
    std::size_t best = 0;
    double bestCost = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < background.size(); ++j) {
      const double c = mergeCost(background[j].pixels, background[j + 1].pixels, in,
                                 params.textureWeight);
      if (c < bestCost) {
        bestCost = c;
        best = j;
      }
    }
    Region& a = background[best];
    Region& b = background[best + 1];
    a.pixels.insert(a.pixels.end(), b.pixels.begin(), b.pixels.end());
    std::sort(a.pixels.begin(), a.pixels.end());
    a.instances.insert(b.instances.begin(), b.instances.end());
    a.depth = medianDepth(a.pixels, in.depth);
    background.erase(background.begin() + static_cast<std::ptrdiff_t>(best) + 1);
  }

  struct Candidate {
    Region region;
    bool promoted;
  };
  std::vector<Candidate> all;
  for (auto& [id, r] : promoted) {
    r.depth = medianDepth(r.pixels, in.depth);
    r.instances.insert(id);
    all.push_back({std::move(r), true});
  }
  for (auto& r : background) all.push_back({std::move(r), false});
  std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    return a.region.depth < b.region.depth;
  });

  GroupedAssignment out;
  out.groups = PlaneI(assign.labels.width(), assign.labels.height(), 1, 0);
  for (std::size_t g = 0; g < all.size(); ++g) {
    const Region& r = all[g].region;
    LayerGroup info;
    info.depth = r.depth > 0.0 ? r.depth : 1.0;
    // Equal medians: push the later group just behind its predecessor.
    if (!out.info.empty() && !(info.depth > out.info.back().depth)) {
      info.depth = std::nextafter(out.info.back().depth, 1e300);
    }
    info.promoted = all[g].promoted;
    info.instanceIds = r.instances;
    info.area = r.pixels.size();
    double sal = 0.0;
    for (std::size_t i : r.pixels) {
      out.groups.data()[i] = static_cast<std::int32_t>(g);
      sal += sem.saliency.data()[i];
    }
    info.saliencyScore = r.pixels.empty() ? 0.0 : sal / static_cast<double>(r.pixels.size());
    out.info.push_back(std::move(info));
  }
  return out;
}

PlaneF fallbackSaliency(const ImageF& image) {
  const int w = image.width();
  const int h = image.height();
  PlaneF lum(w, h, 1, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      lum.at(x, y) = 0.299f * image.at(x, y, 0) + 0.587f * image.at(x, y, 1) + 0.114f * image.at(x, y, 2);
    }
  }
  // Local contrast: |lum - box mean| over a 7x7 window, via an integral image.
  std::vector<double> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      integral[(y + 1) * (w + 1) + x + 1] = lum.at(x, y) + integral[y * (w + 1) + x + 1] +
                                            integral[(y + 1) * (w + 1) + x] - integral[y * (w + 1) + x];
    }
  }
  constexpr int r = 3;
  PlaneF out(w, h, 1, 0.0f);
  float maxV = 0.0f;
  const double sigma2 = 2.0 * std::pow(0.3 * std::max(w, h), 2.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w, x + r + 1);
      const int y0 = std::max(0, y - r), y1 = std::min(h, y + r + 1);
      const double s = integral[y1 * (w + 1) + x1] - integral[y0 * (w + 1) + x1] -
                       integral[y1 * (w + 1) + x0] + integral[y0 * (w + 1) + x0];
      const double mean = s / ((x1 - x0) * (y1 - y0));
      const double dx = x - 0.5 * (w - 1), dy = y - 0.5 * (h - 1);
      const double prior = std::exp(-(dx * dx + dy * dy) / sigma2);
      const float v = static_cast<float>(std::abs(lum.at(x, y) - mean) * prior);
      out.at(x, y) = v;
      maxV = std::max(maxV, v);
    }
  }
  if (maxV > 0.0f) {
    for (auto& v : out.storage()) v /= maxV;
  }
  return out;
}

DecomposedFrame decomposeFrame(const FrameInputs& in, const Camera& camera, int frameIndex,
                               const DecomposeParams& params) {
  DecomposedFrame out;
  out.assignment = solveAssignment(in, params.energy);
  out.grouped = promoteAndMerge(out.assignment, in, params.promotion, params.layerBudget);
  out.layers = matteLayers(out.grouped, in, params.matte, camera, frameIndex, params.maxLayers);
  out.edc = buildEdgeDepthCache(out.layers, in.depth, params.quantizer);
  return out;
}

}  // namespace cpsl
