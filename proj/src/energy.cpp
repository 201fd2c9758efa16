#include "cpsl/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "cpsl/errors.hpp"
#include "cpsl/maxflow.hpp"

namespace cpsl {

void EnergyParams::validate() const {
  if (K < 1) throw InvariantError("energy params: K must be >= 1");
  if (lambdaB < 0 || alphaGrad < 0 || betaSem < 0 || kappaSem < 0 || kappaInst < 0) {
    throw InvariantError("energy params: weights must be non-negative");
  }
  if (maxIters < 1) throw InvariantError("energy params: maxIters must be >= 1");
}

double robustPenalty(double r, double delta) {
  const double a = std::abs(r);
  if (a <= delta) return r * r / (2.0 * delta);
  return a - 0.5 * delta;
}

double defaultHuberDelta(const DepthMap& depth) {
  std::vector<float> v;
  v.reserve(depth.validCount());
  for (std::size_t i = 0; i < depth.values.pixelCount(); ++i) {
    if (depth.valid.data()[i]) v.push_back(depth.values.data()[i]);
  }
  if (v.empty()) return 1e-3;
  std::sort(v.begin(), v.end());
  auto q = [&](double p) { return static_cast<double>(v[static_cast<std::size_t>(p * (v.size() - 1))]); };
  const double iqr = q(0.75) - q(0.25);
  return std::max(0.1 * iqr, 1e-3);
}

namespace {

struct Terms {
  int w = 0, h = 0, K = 0;
  double delta = 1.0;
  std::vector<double> wd, ws, wi;
  std::vector<double> right, down;  // pairwise weights lambda_b * omega
};

double saliencyWeight(float s, bool logistic) {
  if (logistic) return 1.0 / (1.0 + std::exp(-12.0 * (s - 0.5)));
  return std::clamp(static_cast<double>(s), 0.0, 1.0);
}

Terms buildTerms(const FrameInputs& in, const EnergyParams& p) {
  Terms t;
  t.w = in.width();
  t.h = in.height();
  t.K = p.K;
  t.delta = p.huberDelta > 0.0 ? p.huberDelta : defaultHuberDelta(in.depth);
  const std::size_t n = static_cast<std::size_t>(t.w) * t.h;
  t.wd.resize(n);
  t.ws.resize(n);
  t.wi.resize(n);
  t.right.assign(n, 0.0);
  t.down.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    t.wd[i] = in.depth.valid.data()[i] ? in.depth.stability.data()[i] : 0.0;
    t.ws[i] = saliencyWeight(in.semantics.saliency.data()[i], p.logisticSaliency);
    t.wi[i] = in.semantics.instance.data()[i] != 0 ? 1.0 : 0.0;
  }
  auto omega = [&](int x0, int y0, int x1, int y1) {
    double g2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(in.image.at(x0, y0, c)) - in.image.at(x1, y1, c);
      g2 += d * d;
    }
    const double b = std::max(in.semantics.semanticEdge.at(x0, y0), in.semantics.semanticEdge.at(x1, y1));
    return p.lambdaB * std::exp(-(p.alphaGrad * std::sqrt(g2) + p.betaSem * b));
  };
  for (int y = 0; y < t.h; ++y) {
    for (int x = 0; x < t.w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * t.w + x;
      if (x + 1 < t.w) t.right[i] = omega(x, y, x + 1, y);
      if (y + 1 < t.h) t.down[i] = omega(x, y, x, y + 1);
    }
  }
  return t;
}

double unary(const Terms& t, const FrameInputs& in, const LayerModel& m, std::size_t i, int k,
             const EnergyParams& p) {
  double e = 0.0;
  if (t.wd[i] > 0.0) e += t.wd[i] * robustPenalty(in.depth.values.data()[i] - m.depth[k], t.delta);
  if (in.semantics.label.data()[i] != m.majorityClass[k]) e += t.ws[i] * p.kappaSem;
  const std::int32_t inst = in.semantics.instance.data()[i];
  if (inst != 0) {
    const auto it = m.instanceOwner.find(inst);
    if (it == m.instanceOwner.end() || it->second != k) e += t.wi[i] * p.kappaInst;
  }
  return e;
}

std::vector<double> unaryTable(const Terms& t, const FrameInputs& in, const LayerModel& m,
                               const EnergyParams& p) {
  const std::size_t n = static_cast<std::size_t>(t.w) * t.h;
  const int K = m.labelCount();
  std::vector<double> u(n * K);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k) u[i * K + k] = unary(t, in, m, i, k, p);
  }
  return u;
}

double totalEnergy(const Terms& t, const std::vector<double>& u, int K, const PlaneI& labels) {
  double e = 0.0;
  const std::size_t n = static_cast<std::size_t>(t.w) * t.h;
  for (std::size_t i = 0; i < n; ++i) e += u[i * K + labels.data()[i]];
  for (int y = 0; y < t.h; ++y) {
    for (int x = 0; x < t.w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * t.w + x;
      const int l = labels.data()[i];
      if (x + 1 < t.w && labels.data()[i + 1] != l) e += t.right[i];
      if (y + 1 < t.h && labels.data()[i + t.w] != l) e += t.down[i];
    }
  }
  return e;
}

// Exact minimization of a two-label problem: one cut.
void binaryCut(const Terms& t, const std::vector<double>& u, PlaneI& labels) {
  const int n = t.w * t.h;
  BinaryEnergy be(n, 2 * n);
  for (int i = 0; i < n; ++i) be.addUnary(i, u[2 * i], u[2 * i + 1]);
  for (int y = 0; y < t.h; ++y) {
    for (int x = 0; x < t.w; ++x) {
      const int i = y * t.w + x;
      if (x + 1 < t.w && t.right[i] > 0.0) be.addPairwise(i, i + 1, 0.0, t.right[i], t.right[i], 0.0);
      if (y + 1 < t.h && t.down[i] > 0.0) be.addPairwise(i, i + t.w, 0.0, t.down[i], t.down[i], 0.0);
    }
  }
  be.minimize();
  for (int i = 0; i < n; ++i) labels.data()[i] = be.label(i);
}

// One expansion move towards `alpha`; returns true if the energy dropped.
bool expansionMove(const Terms& t, const std::vector<double>& u, int K, int alpha,
                   PlaneI& labels, double& energy) {
  const int n = t.w * t.h;
  const auto& L = labels.data();
  BinaryEnergy be(n, 2 * n);
  for (int i = 0; i < n; ++i) be.addUnary(i, u[static_cast<std::size_t>(i) * K + L[i]],
                                          u[static_cast<std::size_t>(i) * K + alpha]);
  auto pair = [&](int i, int j, double w) {
    if (w <= 0.0) return;
    const double e00 = L[i] != L[j] ? w : 0.0;
    const double e01 = L[i] != alpha ? w : 0.0;
    const double e10 = alpha != L[j] ? w : 0.0;
    be.addPairwise(i, j, e00, e01, e10, 0.0);
  };
  for (int y = 0; y < t.h; ++y) {
    for (int x = 0; x < t.w; ++x) {
      const int i = y * t.w + x;
      if (x + 1 < t.w) pair(i, i + 1, t.right[i]);
      if (y + 1 < t.h) pair(i, i + t.w, t.down[i]);
    }
  }
  be.minimize();
  PlaneI next = labels;
  bool changed = false;
  for (int i = 0; i < n; ++i) {
    if (be.label(i) == 1 && next.data()[i] != alpha) {
      next.data()[i] = alpha;
      changed = true;
    }
  }
  if (!changed) return false;
  const double e = totalEnergy(t, u, K, next);
  if (e < energy) {
    labels = std::move(next);
    energy = e;
    return true;
  }
  return false;
}

double minimizeFixed(const Terms& t, const std::vector<double>& u, int K, PlaneI& labels,
                     int maxSweeps) {
  if (K == 1) {
    std::fill(labels.data().begin(), labels.data().end(), 0);
    return totalEnergy(t, u, K, labels);
  }
  if (K == 2) {
    binaryCut(t, u, labels);
    return totalEnergy(t, u, K, labels);
  }
  double e = totalEnergy(t, u, K, labels);
  for (int sweep = 0; sweep < std::max(1, maxSweeps); ++sweep) {
    bool improved = false;
    for (int a = 0; a < K; ++a) improved |= expansionMove(t, u, K, a, labels, e);
    if (!improved) break;
  }
  return e;
}

}  // namespace

LayerModel deriveModel(const PlaneI& labels, int K, const FrameInputs& in,
                       const std::vector<double>* fallbackDepth) {
  LayerModel m;
  m.depth.assign(K, 0.0);
  m.majorityClass.assign(K, -1);
  std::vector<std::vector<float>> depths(K);
  std::vector<std::map<std::int32_t, int>> classCount(K);
  std::map<std::int32_t, std::vector<int>> instCount;
  const std::size_t n = labels.pixelCount();
  for (std::size_t i = 0; i < n; ++i) {
    const int k = labels.data()[i];
    if (in.depth.valid.data()[i]) depths[k].push_back(in.depth.values.data()[i]);
    ++classCount[k][in.semantics.label.data()[i]];
    const std::int32_t inst = in.semantics.instance.data()[i];
    if (inst != 0) {
      auto& v = instCount[inst];
      if (v.empty()) v.assign(K, 0);
      ++v[k];
    }
  }
  for (int k = 0; k < K; ++k) {
    auto& d = depths[k];
    if (!d.empty()) {
      const std::size_t mid = (d.size() - 1) / 2;
      std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
      m.depth[k] = d[mid];
    } else if (fallbackDepth && k < static_cast<int>(fallbackDepth->size())) {
      m.depth[k] = (*fallbackDepth)[k];
    }
    int best = 0;
    for (const auto& [cls, count] : classCount[k]) {
      if (count > best) {
        best = count;
        m.majorityClass[k] = cls;
      }
    }
  }
  for (const auto& [inst, counts] : instCount) {
    m.instanceOwner[inst] = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  return m;
}

double evaluateEnergy(const PlaneI& labels, const LayerModel& model, const FrameInputs& in,
                      const EnergyParams& params) {
  EnergyParams p = params;
  p.K = model.labelCount();
  const Terms t = buildTerms(in, p);
  const auto u = unaryTable(t, in, model, p);
  return totalEnergy(t, u, p.K, labels);
}

double evaluateEnergy(const PlaneI& labels, const FrameInputs& in, const EnergyParams& params) {
  return evaluateEnergy(labels, deriveModel(labels, params.K, in), in, params);
}

PlaneI quantileInitialization(const FrameInputs& in, int K, std::vector<double>* binDepths) {
  std::vector<float> v;
  for (std::size_t i = 0; i < in.depth.values.pixelCount(); ++i) {
    if (in.depth.valid.data()[i]) v.push_back(in.depth.values.data()[i]);
  }
  if (v.empty()) throw NoValidDepthError("depth map has no valid pixel");
  std::sort(v.begin(), v.end());
  // Upper edge of each bin and its median.
  std::vector<float> edges(K);
  if (binDepths) binDepths->assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    const std::size_t hi = std::min(v.size() - 1, (v.size() * (k + 1)) / K);
    edges[k] = v[hi == 0 ? 0 : std::min(hi, v.size() - 1)];
    if (binDepths) {
      const std::size_t lo = (v.size() * k) / K;
      const std::size_t top = std::max(lo, std::min(v.size(), (v.size() * (k + 1)) / K) - 1);
      (*binDepths)[k] = v[std::min(v.size() - 1, (lo + top) / 2)];
    }
  }
  PlaneI labels(in.width(), in.height(), 1, 0);
  for (std::size_t i = 0; i < labels.pixelCount(); ++i) {
    if (!in.depth.valid.data()[i]) continue;
    const float z = in.depth.values.data()[i];
    int k = 0;
    while (k < K - 1 && z >= edges[k]) ++k;
    labels.data()[i] = k;
  }
  return labels;
}

LayerAssignment solveAssignment(const FrameInputs& in, const EnergyParams& params,
                                const std::optional<LayerModel>& fixedModel) {
  params.validate();
  if (in.depth.validCount() == 0) throw NoValidDepthError("depth map has no valid pixel");
  EnergyParams p = params;
  if (fixedModel) p.K = fixedModel->labelCount();
  const int K = p.K;
  const Terms t = buildTerms(in, p);

  std::vector<double> binDepths;
  PlaneI labels = quantileInitialization(in, K, &binDepths);

  LayerAssignment result;
  if (fixedModel) {
    const auto u = unaryTable(t, in, *fixedModel, p);
    result.energy = minimizeFixed(t, u, K, labels, p.maxIters);
    result.labels = std::move(labels);
    result.representativeDepths = fixedModel->depth;
    return result;
  }

  LayerModel model = deriveModel(labels, K, in, &binDepths);
  PlaneI best = labels;
  double bestEnergy = totalEnergy(t, unaryTable(t, in, model, p), K, labels);
  for (int iter = 0; iter < p.maxIters; ++iter) {
    const auto u = unaryTable(t, in, model, p);
    PlaneI next = labels;
    minimizeFixed(t, u, K, next, p.maxIters);
    LayerModel nextModel = deriveModel(next, K, in, &model.depth);
    const double e = totalEnergy(t, unaryTable(t, in, nextModel, p), K, next);
    const bool stable = next == labels;
    labels = std::move(next);
    model = std::move(nextModel);
    if (e < bestEnergy) {
      bestEnergy = e;
      best = labels;
    }
    if (stable) break;
  }

  // Drop empty labels and order the rest near to far.
  const LayerModel finalModel = deriveModel(best, K, in);
  std::vector<int> count(K, 0);
  std::vector<int> validCount(K, 0);
  for (std::size_t i = 0; i < best.pixelCount(); ++i) {
    ++count[best.data()[i]];
    if (in.depth.valid.data()[i]) ++validCount[best.data()[i]];
  }
  std::vector<int> order;
  for (int k = 0; k < K; ++k) {
    if (count[k] > 0 && validCount[k] > 0) order.push_back(k);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return finalModel.depth[a] < finalModel.depth[b]; });
  std::vector<int> remap(K, -1);
  for (std::size_t r = 0; r < order.size(); ++r) remap[order[r]] = static_cast<int>(r);
  // Labels whose pixels all lack depth join the nearest-depth surviving label 0.
  for (int k = 0; k < K; ++k) {
    if (remap[k] < 0) remap[k] = 0;
  }
  for (auto& l : best.storage()) l = remap[l];
  result.representativeDepths.clear();
  for (int k : order) {
    double z = finalModel.depth[k];
    if (!result.representativeDepths.empty() && !(z > result.representativeDepths.back())) {
      z = std::nextafter(result.representativeDepths.back(), 1e300);
    }
    result.representativeDepths.push_back(z);
  }
  EnergyParams pk = p;
  pk.K = static_cast<int>(order.size());
  result.energy = evaluateEnergy(best, in, pk);
  result.labels = std::move(best);
  return result;
}

}  // namespace cpsl
