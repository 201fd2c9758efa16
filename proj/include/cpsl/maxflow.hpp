#pragma once

#include <cstdint>
#include <deque>
#include <vector>

namespace cpsl {

/// Augmenting-path max-flow on a directed graph with source/sink terminal
/// capacities (Boykov-Kolmogorov search trees). Tuned for the sparse
/// 4-connected grids produced by labeling problems.
class MaxFlow {
 public:
  MaxFlow() = default;
  explicit MaxFlow(int nodes, int edgeHint = 0);

  int addNodes(int n);
  int nodeCount() const { return static_cast<int>(nodes_.size()); }

  /// Adds capacity from the source to i and from i to the sink.
  void addTerminalWeights(int i, double toSource, double toSink);
  /// Adds arc i->j with capacity `cap` and j->i with `revCap`.
  void addEdge(int i, int j, double cap, double revCap);

  double solve();

  /// True when i ends on the sink side of the minimum cut.
  bool onSinkSide(int i) const;

 private:
  static constexpr int kNone = -1;
  static constexpr int kTerminal = -2;
  static constexpr int kOrphan = -3;

  struct Arc {
    int head;
    int next;
    double rcap;
  };
  struct Node {
    int first = kNone;
    int parent = kNone;
    int ts = 0;
    int dist = 0;
    double trcap = 0.0;
    bool isSink = false;
    bool active = false;
  };

  static int sister(int a) { return a ^ 1; }
  void setActive(int i);
  int nextActive();
  void augment(int middle);
  void processSourceOrphan(int i);
  void processSinkOrphan(int i);

  std::vector<Node> nodes_;
  std::vector<Arc> arcs_;
  std::deque<int> activeQueue_;
  std::deque<int> orphans_;
  double flow_ = 0.0;
  int time_ = 0;
};

/// Pseudo-boolean energy with submodular pairwise terms, minimized exactly
/// by a single minimum cut. Label 0 is the source side.
class BinaryEnergy {
 public:
  explicit BinaryEnergy(int variables, int edgeHint = 0);

  void addUnary(int i, double e0, double e1);
  /// Pairwise table (e00, e01, e10, e11); requires e01 + e10 >= e00 + e11.
  void addPairwise(int i, int j, double e00, double e01, double e10, double e11);
  void addConstant(double c) { constant_ += c; }

  /// Returns the minimum energy; labels are then available via label().
  double minimize();
  int label(int i) const { return graph_.onSinkSide(i) ? 1 : 0; }

 private:
  MaxFlow graph_;
  std::vector<double> u0_, u1_;
  double constant_ = 0.0;
};

}  // namespace cpsl
