#include "cpsl/maxflow.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <stdexcept>

namespace cpsl {
namespace {
constexpr int kInfDist = std::numeric_limits<int>::max();
}

MaxFlow::MaxFlow(int nodes, int edgeHint) {
  nodes_.resize(static_cast<std::size_t>(nodes));
  arcs_.reserve(static_cast<std::size_t>(edgeHint) * 2);
}

int MaxFlow::addNodes(int n) {
  const int first = nodeCount();
  nodes_.resize(nodes_.size() + static_cast<std::size_t>(n));
  return first;
}

void MaxFlow::addTerminalWeights(int i, double toSource, double toSink) {
  assert(toSource >= 0.0 && toSink >= 0.0);
  Node& n = nodes_[i];
  const double delta = n.trcap;
  if (delta > 0.0) {
    toSource += delta;
  } else {
    toSink -= delta;
  }
  flow_ += std::min(toSource, toSink);
  n.trcap = toSource - toSink;
}

void MaxFlow::addEdge(int i, int j, double cap, double revCap) {
  assert(i != j && cap >= 0.0 && revCap >= 0.0);
  const int a = static_cast<int>(arcs_.size());
  arcs_.push_back({j, nodes_[i].first, cap});
  arcs_.push_back({i, nodes_[j].first, revCap});
  nodes_[i].first = a;
  nodes_[j].first = a + 1;
}

void MaxFlow::setActive(int i) {
  if (!nodes_[i].active) {
    nodes_[i].active = true;
    activeQueue_.push_back(i);
  }
}

int MaxFlow::nextActive() {
  while (!activeQueue_.empty()) {
    const int i = activeQueue_.front();
    activeQueue_.pop_front();
    nodes_[i].active = false;
    if (nodes_[i].parent != kNone) return i;
  }
  return kNone;
}

void MaxFlow::augment(int middle) {
  // middle runs from a source-tree node to a sink-tree node.
  double bottleneck = arcs_[middle].rcap;
  int i = arcs_[sister(middle)].head;
  for (;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) break;
    bottleneck = std::min(bottleneck, arcs_[sister(a)].rcap);
    i = arcs_[a].head;
  }
  bottleneck = std::min(bottleneck, nodes_[i].trcap);
  i = arcs_[middle].head;
  for (;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) break;
    bottleneck = std::min(bottleneck, arcs_[a].rcap);
    i = arcs_[a].head;
  }
  bottleneck = std::min(bottleneck, -nodes_[i].trcap);

  arcs_[sister(middle)].rcap += bottleneck;
  arcs_[middle].rcap -= bottleneck;

  i = arcs_[sister(middle)].head;
  for (;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) break;
    arcs_[a].rcap += bottleneck;
    arcs_[sister(a)].rcap -= bottleneck;
    if (arcs_[sister(a)].rcap <= 0.0) {
      arcs_[sister(a)].rcap = 0.0;
      nodes_[i].parent = kOrphan;
      orphans_.push_front(i);
    }
    i = arcs_[a].head;
  }
  nodes_[i].trcap -= bottleneck;
  if (nodes_[i].trcap <= 0.0) {
    nodes_[i].trcap = 0.0;
    nodes_[i].parent = kOrphan;
    orphans_.push_front(i);
  }

  i = arcs_[middle].head;
  for (;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) break;
    arcs_[sister(a)].rcap += bottleneck;
    arcs_[a].rcap -= bottleneck;
    if (arcs_[a].rcap <= 0.0) {
      arcs_[a].rcap = 0.0;
      nodes_[i].parent = kOrphan;
      orphans_.push_front(i);
    }
    i = arcs_[a].head;
  }
  nodes_[i].trcap += bottleneck;
  if (nodes_[i].trcap >= 0.0) {
    nodes_[i].trcap = 0.0;
    nodes_[i].parent = kOrphan;
    orphans_.push_front(i);
  }
  flow_ += bottleneck;
}

void MaxFlow::processSourceOrphan(int i) {
  int bestArc = kNone;
  int bestDist = kInfDist;
  for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
    if (arcs_[sister(a0)].rcap <= 0.0) continue;
    int j = arcs_[a0].head;
    if (nodes_[j].isSink || nodes_[j].parent == kNone) continue;
    // Walk to the root to check the origin.
    int d = 0;
    for (;;) {
      if (nodes_[j].ts == time_) {
        d += nodes_[j].dist;
        break;
      }
      const int a = nodes_[j].parent;
      ++d;
      if (a == kTerminal) {
        nodes_[j].ts = time_;
        nodes_[j].dist = 1;
        break;
      }
      if (a == kOrphan) {
        d = kInfDist;
        break;
      }
      j = arcs_[a].head;
    }
    if (d < kInfDist) {
      if (d < bestDist) {
        bestArc = a0;
        bestDist = d;
      }
      for (j = arcs_[a0].head; nodes_[j].ts != time_; j = arcs_[nodes_[j].parent].head) {
        nodes_[j].ts = time_;
        nodes_[j].dist = d--;
      }
    }
  }
  nodes_[i].parent = bestArc;
  if (bestArc != kNone) {
    nodes_[i].ts = time_;
    nodes_[i].dist = bestDist + 1;
    return;
  }
  for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
    const int j = arcs_[a0].head;
    const int a = nodes_[j].parent;
    if (nodes_[j].isSink || a == kNone) continue;
    if (arcs_[sister(a0)].rcap > 0.0) setActive(j);
    if (a != kTerminal && a != kOrphan && arcs_[a].head == i) {
      nodes_[j].parent = kOrphan;
      orphans_.push_back(j);
    }
  }
}

void MaxFlow::processSinkOrphan(int i) {
  int bestArc = kNone;
  int bestDist = kInfDist;
  for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
    if (arcs_[a0].rcap <= 0.0) continue;
    int j = arcs_[a0].head;
    if (!nodes_[j].isSink || nodes_[j].parent == kNone) continue;
    int d = 0;
    for (;;) {
      if (nodes_[j].ts == time_) {
        d += nodes_[j].dist;
        break;
      }
      const int a = nodes_[j].parent;
      ++d;
      if (a == kTerminal) {
        nodes_[j].ts = time_;
        nodes_[j].dist = 1;
        break;
      }
      if (a == kOrphan) {
        d = kInfDist;
        break;
      }
      j = arcs_[a].head;
    }
    if (d < kInfDist) {
      if (d < bestDist) {
        bestArc = a0;
        bestDist = d;
      }
      for (j = arcs_[a0].head; nodes_[j].ts != time_; j = arcs_[nodes_[j].parent].head) {
        nodes_[j].ts = time_;
        nodes_[j].dist = d--;
      }
    }
  }
  nodes_[i].parent = bestArc;
  if (bestArc != kNone) {
    nodes_[i].ts = time_;
    nodes_[i].dist = bestDist + 1;
    return;
  }
  for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
    const int j = arcs_[a0].head;
    const int a = nodes_[j].parent;
    if (!nodes_[j].isSink || a == kNone) continue;
    if (arcs_[a0].rcap > 0.0) setActive(j);
    if (a != kTerminal && a != kOrphan && arcs_[a].head == i) {
      nodes_[j].parent = kOrphan;
      orphans_.push_back(j);
    }
  }
}

double MaxFlow::solve() {
  activeQueue_.clear();
  orphans_.clear();
  time_ = 0;
  for (int i = 0; i < nodeCount(); ++i) {
    Node& n = nodes_[i];
    n.active = false;
    n.ts = 0;
    if (n.trcap > 0.0) {
      n.isSink = false;
      n.parent = kTerminal;
      n.dist = 1;
      setActive(i);
    } else if (n.trcap < 0.0) {
      n.isSink = true;
      n.parent = kTerminal;
      n.dist = 1;
      setActive(i);
    } else {
      n.parent = kNone;
    }
  }

  int current = kNone;
  for (;;) {
    int i = current;
    if (i != kNone) {
      nodes_[i].active = false;
      if (nodes_[i].parent == kNone) i = kNone;
    }
    if (i == kNone) {
      i = nextActive();
      if (i == kNone) break;
    }

    int middle = kNone;
    if (!nodes_[i].isSink) {
      for (int a = nodes_[i].first; a != kNone; a = arcs_[a].next) {
        if (arcs_[a].rcap <= 0.0) continue;
        const int j = arcs_[a].head;
        Node& nj = nodes_[j];
        if (nj.parent == kNone) {
          nj.isSink = false;
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
          setActive(j);
        } else if (nj.isSink) {
          middle = a;
          break;
        } else if (nj.ts <= nodes_[i].ts && nj.dist > nodes_[i].dist) {
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
        }
      }
    } else {
      for (int a = nodes_[i].first; a != kNone; a = arcs_[a].next) {
        if (arcs_[sister(a)].rcap <= 0.0) continue;
        const int j = arcs_[a].head;
        Node& nj = nodes_[j];
        if (nj.parent == kNone) {
          nj.isSink = true;
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
          setActive(j);
        } else if (!nj.isSink) {
          middle = sister(a);
          break;
        } else if (nj.ts <= nodes_[i].ts && nj.dist > nodes_[i].dist) {
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
        }
      }
    }

    ++time_;
    if (middle != kNone) {
      nodes_[i].active = true;  // keep processing this node next round
      current = i;
      augment(middle);
      while (!orphans_.empty()) {
        const int o = orphans_.front();
        orphans_.pop_front();
        if (nodes_[o].isSink) {
          processSinkOrphan(o);
        } else {
          processSourceOrphan(o);
        }
      }
    } else {
      current = kNone;
    }
  }
  return flow_;
}

bool MaxFlow::onSinkSide(int i) const {
  const Node& n = nodes_[i];
  return n.parent != kNone && n.isSink;
}

BinaryEnergy::BinaryEnergy(int variables, int edgeHint)
    : graph_(variables, edgeHint), u0_(variables, 0.0), u1_(variables, 0.0) {}

void BinaryEnergy::addUnary(int i, double e0, double e1) {
  u0_[i] += e0;
  u1_[i] += e1;
}

void BinaryEnergy::addPairwise(int i, int j, double e00, double e01, double e10, double e11) {
  const double cut = e01 + e10 - e00 - e11;
  if (cut < -1e-9 * (std::abs(e01) + std::abs(e10) + 1.0)) {
    throw std::invalid_argument("pairwise term is not submodular");
  }
  constant_ += e00;
  u1_[i] += e10 - e00;
  u1_[j] += e11 - e10;
  graph_.addEdge(i, j, std::max(0.0, cut), 0.0);
}

double BinaryEnergy::minimize() {
  // Label 1 (sink side) cuts the source arc, so the source arc carries e1.
  double base = constant_;
  for (int i = 0; i < static_cast<int>(u0_.size()); ++i) {
    const double m = std::min(u0_[i], u1_[i]);
    base += m;
    graph_.addTerminalWeights(i, u1_[i] - m, u0_[i] - m);
  }
  return base + graph_.solve();
}

}  // namespace cpsl
