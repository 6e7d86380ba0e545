#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "loopsoup/green.hpp"
#include "loopsoup/loops.hpp"

using namespace loopsoup;
using loopsoup::testing::share;
using loopsoup::testing::undirected;

namespace {

// K3 as an unoriented graph: edges 0:0->1 1:1->0 2:1->2 3:2->1 4:2->0 5:0->2.
GraphPtr triangle() { return share(undirected(3, {{0, 1}, {1, 2}, {2, 0}})); }

// Every closed edge sequence of length n in the domain, rooted anywhere.
void all_rooted(const Domain& d, int n, std::vector<EdgePath>& out) {
  EdgePath path;
  std::function<void(VertexId, VertexId)> rec = [&](VertexId start, VertexId at) {
    if (static_cast<int>(path.size()) == n) {
      if (at == start) out.push_back(path);
      return;
    }
    for (EdgeIndex e : d.graph().out_edges(at)) {
      if (!d.edge_usable(e)) continue;
      path.push_back(e);
      rec(start, d.graph().head(e));
      path.pop_back();
    }
  };
  for (VertexId x : d.vertices()) rec(x, x);
}

}  // namespace

TEST(Rho, Examples) {
  EXPECT_EQ(rho_mass({0}, 2), Rational(1, 2));
  EXPECT_EQ(rho_mass({0, 1}, 2), Rational(1, 8));
  EXPECT_EQ(rho_mass({0, 1, 2, 3, 4}, 1), Rational(1, 5));
}

TEST(Canonical, DoubleCoverHasJTwo) {
  const auto g = triangle();
  const auto c = canonicalize_oriented(*g, {1, 0, 1, 0});
  EXPECT_EQ(c.canonical, (EdgePath{0, 1, 0, 1}));
  EXPECT_EQ(c.J, 2);
  EXPECT_EQ(c.mu, Rational(1, 32));
}

TEST(Canonical, RotationsCollapse) {
  const auto g = triangle();
  const EdgePath l{2, 4, 0};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto c = canonicalize_oriented(*g, rotate(l, k));
    EXPECT_EQ(c.canonical, (EdgePath{0, 2, 4}));
    EXPECT_EQ(c.J, 1);
  }
}

TEST(Canonical, RejectsNonLoops) {
  const auto g = triangle();
  EXPECT_THROW(canonicalize_oriented(*g, {0, 2, 5}), std::invalid_argument);
  EXPECT_THROW(canonicalize_oriented(*g, {}), std::invalid_argument);
}

TEST(Canonical, RootedMassesSumToClassMass) {
  const auto g = triangle();
  const Domain d = Domain::whole(g);
  for (int n = 1; n <= 6; ++n) {
    std::vector<EdgePath> rooted;
    all_rooted(d, n, rooted);
    std::map<EdgePath, std::pair<Rational, int>> by_class;
    for (const auto& l : rooted) {
      auto& [sum, count] = by_class[canonicalize_oriented(*g, l).canonical];
      sum += rho_mass(l, 2);
      ++count;
    }
    for (const auto& [key, acc] : by_class) {
      const auto c = canonicalize_oriented(*g, key);
      EXPECT_EQ(acc.first, c.mu);
      EXPECT_EQ(acc.second, n / c.J);
    }
  }
}

TEST(Canonical, BacktrackIsItsOwnReversal) {
  const auto g = triangle();
  const auto c = canonicalize_unoriented(*g, {0, 1}, *g->involution());
  EXPECT_TRUE(c.self_reverse);
  EXPECT_EQ(c.J_tilde, 2);
  EXPECT_EQ(c.nu, Rational(1, 8));
}

TEST(Canonical, DirectedTriangleDiffersFromReversal) {
  const auto g = triangle();
  const auto c = canonicalize_unoriented(*g, {0, 2, 4}, *g->involution());
  EXPECT_FALSE(c.self_reverse);
  EXPECT_EQ(c.J_tilde, 1);
  EXPECT_EQ(c.nu, canonicalize_oriented(*g, {0, 2, 4}).mu);
}

TEST(Canonical, FixedSelfEdgeLoop) {
  const auto g = share(build_graph(1, {{0, 0, 0, true, std::nullopt}}, true));
  const auto c = canonicalize_unoriented(*g, {0}, *g->involution());
  EXPECT_EQ(c.J_tilde, 2);
  EXPECT_EQ(c.nu, Rational(1, 2));
}

TEST(Canonical, InvarianceProperties) {
  const auto b = make_builtin("complete:3", 4, 1);
  const Domain d(b.graph, b.core);
  const auto& iota = *b.graph->involution();
  for (int n = 1; n <= 4; ++n) {
    std::vector<EdgePath> rooted;
    all_rooted(d, n, rooted);
    for (const auto& l : rooted) {
      const auto oc = canonicalize_oriented(*b.graph, l);
      const auto uc = canonicalize_unoriented(*b.graph, l, iota);
      for (std::size_t k = 0; k < l.size(); ++k) {
        EXPECT_EQ(canonicalize_oriented(*b.graph, rotate(l, k)).canonical, oc.canonical);
      }
      EXPECT_EQ(canonicalize_oriented(*b.graph, oc.canonical).canonical, oc.canonical);
      const auto rc = canonicalize_unoriented(*b.graph, reverse_path(l, iota), iota);
      EXPECT_EQ(rc.canonical, uc.canonical);
      EXPECT_EQ(rc.nu, uc.nu);
      // ν is the image of μ/2: one preimage counted twice or two counted once.
      const auto back = canonicalize_oriented(*b.graph, reverse_path(l, iota));
      const Rational image = uc.self_reverse ? Rational(oc.mu / 2) : Rational((oc.mu + back.mu) / 2);
      EXPECT_EQ(uc.nu, image);
    }
  }
}

TEST(Enumerate, SelfEdgeRepetitions) {
  const auto b = make_builtin("single", 2, 1);
  const auto cat = enumerate_loops(Domain(b.graph, b.core), 6, Orientation::Oriented);
  ASSERT_EQ(cat.classes.size(), 6u);
  for (int k = 1; k <= 6; ++k) {
    const auto& c = cat.classes[static_cast<std::size_t>(k - 1)];
    EXPECT_EQ(c.n(), k);
    EXPECT_EQ(c.multiplicity, k);
    EXPECT_EQ(c.mass, inverse_power(2, static_cast<unsigned>(k)) / k);
  }
}

TEST(Enumerate, TraceIdentityOnTriangle) {
  const auto g = triangle();
  const Domain d = Domain::whole(g);
  const auto cat = enumerate_loops(d, 8, Orientation::Oriented);
  Eigen::MatrixXd p = killed_transition(d);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(3, 3);
  double expected = 0;
  for (int n = 1; n <= 8; ++n) {
    power = power * p;
    expected += power.trace() / n;
  }
  EXPECT_NEAR(cat.total_mass_d(), expected, 1e-12);
  EXPECT_TRUE(std::isinf(cat.tail_bound));
}

TEST(Enumerate, BelowGirthIsEmpty) {
  const auto b = make_builtin("cycle:4", 2);
  EXPECT_TRUE(enumerate_loops(Domain(b.graph, b.core), 1, Orientation::Oriented).classes.empty());
  const auto b3 = make_builtin("cycle:3", 3, 1);
  const auto cat = enumerate_loops(Domain(b3.graph, b3.core), 1, Orientation::Oriented);
  EXPECT_TRUE(cat.classes.empty());
}

TEST(Enumerate, MatchesBruteForce) {
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d(b.graph, b.core);
  for (auto orientation : {Orientation::Oriented, Orientation::Unoriented}) {
    const auto cat = enumerate_loops(d, 6, orientation);
    std::map<EdgePath, Rational> brute;
    for (int n = 1; n <= 6; ++n) {
      std::vector<EdgePath> rooted;
      all_rooted(d, n, rooted);
      for (const auto& l : rooted) {
        if (orientation == Orientation::Oriented) {
          const auto c = canonicalize_oriented(*b.graph, l);
          brute[c.canonical] = c.mu;
        } else {
          const auto c = canonicalize_unoriented(*b.graph, l, *b.graph->involution());
          brute[c.canonical] = c.nu;
        }
      }
    }
    ASSERT_EQ(cat.classes.size(), brute.size());
    for (const auto& c : cat.classes) {
      ASSERT_TRUE(brute.count(c.canonical));
      EXPECT_EQ(brute[c.canonical], c.mass);
    }
  }
}

TEST(Enumerate, BudgetIsEnforced) {
  const auto b = make_builtin("complete:4", 4, 1);
  EnumerationOptions opts;
  opts.max_classes = 10;
  EXPECT_THROW(enumerate_loops(Domain(b.graph, b.core), 6, Orientation::Oriented, opts), BudgetExceeded);
}

TEST(Enumerate, JsonLines) {
  const auto b = make_builtin("cycle:3", 2);
  const auto cat = enumerate_loops(Domain(b.graph, b.core), 2, Orientation::Oriented);
  std::ostringstream out;
  write_catalog_jsonl(out, cat);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            R"({"edges":[0,1],"n":2,"J":1,"mass":"1/4","mass_float":0.25})");
}

TEST(TailBound, GeometricExample) {
  EXPECT_LE(tail_bound_for(0.5, 1, 10), std::pow(2.0, -10));
  EXPECT_GT(tail_bound_for(0.5, 1, 10), 0.0);
}

TEST(TailBound, MonotoneAndVanishing) {
  double prev = tail_bound_for(0.9, 3, 1);
  for (int L = 2; L < 400; ++L) {
    const double t = tail_bound_for(0.9, 3, L);
    EXPECT_LE(t, prev);
    prev = t;
  }
  EXPECT_LT(prev, 1e-15);
}

TEST(TailBound, DominatesOmittedMass) {
  for (const char* shape : {"path:2", "cycle:3", "path:4", "complete:4"}) {
    const auto b = make_builtin(shape, 4, 1);
    const Domain d(b.graph, b.core);
    const int L = 4;
    const auto small = enumerate_loops(d, L, Orientation::Oriented);
    const auto big = enumerate_loops(d, 2 * L, Orientation::Oriented);
    EXPECT_GE(small.tail_bound, big.total_mass_d() - small.total_mass_d()) << shape;
    EXPECT_DOUBLE_EQ(small.tail_bound, tail_bound(d, L));
  }
}

TEST(TailBound, RecurrentDomainThrows) {
  EXPECT_THROW(tail_bound(Domain::whole(triangle()), 3), RecurrentDomainError);
}
