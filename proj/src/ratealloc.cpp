#include "cpsl/ratealloc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpsl/distance.hpp"
#include "cpsl/errors.hpp"

namespace cpsl {

RdCurve RdCurve::fromSamples(std::vector<RdPoint> samples) {
  if (samples.empty()) throw InvariantError("RD curve needs at least one sample");
  for (const auto& p : samples) {
    if (!std::isfinite(p.rate) || !std::isfinite(p.distortion) || p.rate < 0.0) {
      throw InvariantError("RD samples must be finite with non-negative rate");
    }
  }
  std::stable_sort(samples.begin(), samples.end(), [](const RdPoint& a, const RdPoint& b) {
    return a.rate != b.rate ? a.rate < b.rate : a.distortion < b.distortion;
  });
  // Keep the Pareto front: each kept point strictly lowers the distortion.
  std::vector<RdPoint> front;
  for (const auto& p : samples) {
    if (!front.empty() && p.rate == front.back().rate) continue;
    if (!front.empty() && !(p.distortion < front.back().distortion)) continue;
    front.push_back(p);
  }
  // Lower convex hull (monotone chain).
  std::vector<RdPoint> hull;
  for (const auto& p : front) {
    while (hull.size() >= 2) {
      const RdPoint& a = hull[hull.size() - 2];
      const RdPoint& b = hull.back();
      const double cross = (b.rate - a.rate) * (p.distortion - a.distortion) -
                           (b.distortion - a.distortion) * (p.rate - a.rate);
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(p);
  }
  return RdCurve{std::move(hull)};
}

double Allocation::totalRate() const { return std::accumulate(rates.begin(), rates.end(), 0.0); }

Allocation allocateRates(const std::vector<RdCurve>& curves, const std::vector<double>& weights,
                         double budget) {
  const std::size_t K = curves.size();
  if (weights.size() != K) throw InputError("one weight per RD curve is required");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("rate weights must be finite and >= 0");
  }
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> w(K);
  for (std::size_t k = 0; k < K; ++k) w[k] = wsum > 0.0 ? weights[k] / wsum : 1.0 / static_cast<double>(K);

  Allocation a;
  a.point.assign(K, 0);
  a.rates.resize(K);
  double spent = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (curves[k].points.empty()) throw InputError("empty RD curve");
    a.rates[k] = curves[k].points.front().rate;
    spent += a.rates[k];
  }
  if (spent > budget) {
    throw InfeasibleError("rate budget " + std::to_string(budget) + " is below the minimum " +
                          std::to_string(spent));
  }

  struct Segment {
    double slope;  // weighted distortion saved per unit rate
    std::size_t layer;
    int to;
    double dr;
  };
  std::vector<Segment> segs;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& P = curves[k].points;
    for (std::size_t i = 1; i < P.size(); ++i) {
      const double dr = P[i].rate - P[i - 1].rate;
      segs.push_back({w[k] * (P[i - 1].distortion - P[i].distortion) / dr, k, static_cast<int>(i), dr});
    }
  }
  // Hull slopes flatten within a layer, so this order respects each layer's chain.
  std::stable_sort(segs.begin(), segs.end(), [](const Segment& x, const Segment& y) {
    if (x.slope != y.slope) return x.slope > y.slope;
    if (x.layer != y.layer) return x.layer < y.layer;
    return x.to < y.to;
  });
  a.lambda = segs.empty() ? 0.0 : segs.front().slope;
  for (std::size_t i = 0; i < segs.size();) {
    std::size_t j = i;
    double dr = 0.0;
    while (j < segs.size() && segs[j].slope == segs[i].slope) dr += segs[j++].dr;
    if (spent + dr > budget) break;
    for (std::size_t s = i; s < j; ++s) {
      a.point[segs[s].layer] = segs[s].to;
      a.rates[segs[s].layer] = curves[segs[s].layer].points[static_cast<std::size_t>(segs[s].to)].rate;
    }
    spent += dr;
    a.lambda = j < segs.size() ? segs[j].slope : 0.0;
    i = j;
  }
  return a;
}

std::vector<double> layerWeights(const LayerSet& ls, double mu) {
  const std::size_t K = ls.size();
  std::vector<double> raw(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const Layer& L = ls.layers[k];
    Mask region(L.width(), L.height(), 1, 0);
    std::size_t area = 0;
    for (std::size_t i = 0; i < region.pixelCount(); ++i) {
      region.data()[i] = L.rgba.data()[i * 4 + 3] >= 0.5f;
      area += region.data()[i];
    }
    std::size_t contour = 0;
    for (auto v : innerContour(region).data()) contour += v;
    const double density = area > 0 ? static_cast<double>(contour) / static_cast<double>(area) : 0.0;
    raw[k] = std::max(0.0, L.saliencyScore) + mu * density;
  }
  const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
  for (double& v : raw) v = sum > 0.0 ? v / sum : 1.0 / static_cast<double>(K);
  return raw;
}

}  // namespace cpsl
