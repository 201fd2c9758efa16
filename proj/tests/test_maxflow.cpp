#include <doctest.h>

#include <limits>

#include "cpsl/maxflow.hpp"
#include "support.hpp"

using namespace cpsl;

TEST_SUITE("maxflow") {
  TEST_CASE("textbook network has flow 23") {
    // s->v1 16, s->v2 13, v1->v3 12, v2->v1 4, v2->v4 14, v3->v2 9, v3->t 20,
    // v4->v3 7, v4->t 4.
    MaxFlow g(4);
    g.addTerminalWeights(0, 16, 0);
    g.addTerminalWeights(1, 13, 0);
    g.addTerminalWeights(2, 0, 20);
    g.addTerminalWeights(3, 0, 4);
    g.addEdge(0, 2, 12, 0);
    g.addEdge(1, 0, 4, 0);
    g.addEdge(1, 3, 14, 0);
    g.addEdge(2, 1, 9, 0);
    g.addEdge(3, 2, 7, 0);
    CHECK(g.solve() == doctest::Approx(23.0));
  }

  TEST_CASE("min cut separates by terminal preference") {
    MaxFlow g(2);
    g.addTerminalWeights(0, 5, 1);
    g.addTerminalWeights(1, 1, 5);
    g.addEdge(0, 1, 0.5, 0.5);
    CHECK(g.solve() == doctest::Approx(2.5));
    CHECK_FALSE(g.onSinkSide(0));
    CHECK(g.onSinkSide(1));
  }

  TEST_CASE("binary energy matches exhaustive search") {
    test::Rng rng(31);
    for (int trial = 0; trial < 60; ++trial) {
      const int n = test::uniformInt(rng, 1, 9);
      std::vector<std::array<double, 2>> unary(static_cast<std::size_t>(n));
      struct Pair {
        int i, j;
        double e00, e01, e10, e11;
      };
      std::vector<Pair> pairs;
      BinaryEnergy E(n);
      for (int i = 0; i < n; ++i) {
        unary[static_cast<std::size_t>(i)] = {test::uniform(rng, -2, 2), test::uniform(rng, -2, 2)};
        E.addUnary(i, unary[static_cast<std::size_t>(i)][0], unary[static_cast<std::size_t>(i)][1]);
      }
      for (int e = 0; e < 2 * n; ++e) {
        const int i = test::uniformInt(rng, 0, n - 1), j = test::uniformInt(rng, 0, n - 1);
        if (i == j) continue;
        // Submodular: e00 + e11 <= e01 + e10.
        Pair p{i, j, test::uniform(rng, 0, 1), test::uniform(rng, 0, 2), 0.0, test::uniform(rng, 0, 1)};
        p.e10 = std::max(test::uniform(rng, 0, 2), p.e00 + p.e11 - p.e01);
        pairs.push_back(p);
        E.addPairwise(i, j, p.e00, p.e01, p.e10, p.e11);
      }
      const double c = test::uniform(rng, -1, 1);
      E.addConstant(c);
      double best = std::numeric_limits<double>::infinity();
      for (int m = 0; m < (1 << n); ++m) {
        double v = c;
        for (int i = 0; i < n; ++i) v += unary[static_cast<std::size_t>(i)][(m >> i) & 1];
        for (const Pair& p : pairs) {
          const int a = (m >> p.i) & 1, b = (m >> p.j) & 1;
          v += a ? (b ? p.e11 : p.e10) : (b ? p.e01 : p.e00);
        }
        best = std::min(best, v);
      }
      const double got = E.minimize();
      CHECK(got == doctest::Approx(best).epsilon(1e-9));
      double check = c;
      for (int i = 0; i < n; ++i) check += unary[static_cast<std::size_t>(i)][E.label(i)];
      for (const Pair& p : pairs) {
        const int a = E.label(p.i), b = E.label(p.j);
        check += a ? (b ? p.e11 : p.e10) : (b ? p.e01 : p.e00);
      }
      CHECK(check == doctest::Approx(best).epsilon(1e-9));
    }
  }
}
