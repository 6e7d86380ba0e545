#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "loopsoup/bridges.hpp"
#include "loopsoup/stats.hpp"

using namespace loopsoup;
using loopsoup::testing::share;
using loopsoup::testing::undirected;

namespace {

Domain core_domain(const BuiltinGraph& b) { return Domain(b.graph, b.core); }

// Components {0, 1} and {2, 3}, killed through 4 and 5.
Domain two_components() {
  const auto g = share(regularize_degree(undirected(6, {{0, 1}, {2, 3}, {0, 4}, {1, 4}, {2, 5}, {3, 5}}), 3));
  return Domain(g, {0, 1, 2, 3});
}

// χ² of sampled bridge lengths against the exact length law, with a tail cell
// beyond max_length.
double length_law_p_value(const Domain& d, VertexId x, VertexId y, int max_length, int samples,
                          std::uint64_t seed) {
  const auto green = green_function(d);
  std::vector<double> expected(static_cast<std::size_t>(max_length) + 2, 0.0);
  for (const auto& b : enumerate_bridges(d, x, y, max_length)) {
    expected[static_cast<std::size_t>(b.length())] += bridge_probability(d, green, b);
  }
  double below = 0;
  for (double p : expected) below += p;
  expected.back() = 1.0 - below;
  for (double& e : expected) e *= samples;
  std::vector<double> observed(expected.size(), 0.0);
  BridgeSampler sampler(d);
  Rng rng(seed);
  for (int i = 0; i < samples; ++i) {
    const int n = sampler.sample(x, y, rng).length();
    observed[static_cast<std::size_t>(std::min(n, max_length + 1))] += 1;
  }
  return chi_square_gof(observed, expected).p_value;
}

}  // namespace

TEST(BridgeProbability, ZeroLengthWithoutEdges) {
  const auto b = make_builtin("single", 1, 1);
  const Domain d = core_domain(b);
  const auto green = green_function(d, true);
  EXPECT_EQ(bridge_probability_exact(d, green, {0, 0, {}}), 1);
  BridgeSampler sampler(d);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sampler.sample(0, 0, rng).length(), 0);
}

TEST(BridgeProbability, SelfEdgeGeometricLaw) {
  const auto b = make_builtin("single", 2, 1);
  const Domain d = core_domain(b);
  const auto green = green_function(d, true);
  const auto bridges = enumerate_bridges(d, 0, 0, 10);
  ASSERT_EQ(bridges.size(), 11u);
  Rational total = 0;
  for (const auto& br : bridges) {
    const Rational p = bridge_probability_exact(d, green, br);
    EXPECT_EQ(p, inverse_power(2, br.length()) / 2);
    total += p;
  }
  EXPECT_EQ(total, 1 - inverse_power(2, 11));
}

TEST(BridgeProbability, LeavingTheDomainHasZeroProbability) {
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d(b.graph, {0, 1});
  const auto green = green_function(d);
  EdgePath path;
  for (EdgeIndex e : b.graph->out_edges(1)) {
    if (b.graph->head(e) == 2) path = {e};
  }
  ASSERT_FALSE(path.empty());
  EXPECT_EQ(bridge_probability(d, green, {1, 2, path}), 0.0);
  EXPECT_EQ(bridge_probability(d, green, {0, 2, {}}), 0.0);
  const Domain split = two_components();
  EXPECT_THROW(bridge_probability(split, green_function(split), {0, 2, {}}), std::invalid_argument);
}

TEST(BridgeProbability, TruncatedSumMatchesGreenRemainder) {
  // Σ_{n<=L} P(bridge) = 1 - (P^{L+1} G)(x, y) / G(x, y), exactly.
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d = core_domain(b);
  const auto green = green_function(d, true);
  const auto p = killed_transition_exact(d);
  const int n = d.size();
  const int L = 5;
  std::vector<Rational> power(static_cast<std::size_t>(n * n), 0);
  for (int i = 0; i < n; ++i) power[static_cast<std::size_t>(i * n + i)] = 1;
  for (int step = 0; step <= L; ++step) {
    std::vector<Rational> next(static_cast<std::size_t>(n * n), 0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          next[static_cast<std::size_t>(i * n + j)] +=
              power[static_cast<std::size_t>(i * n + k)] * p[static_cast<std::size_t>(k * n + j)];
    power = std::move(next);
  }
  for (VertexId x : d.vertices()) {
    for (VertexId y : d.vertices()) {
      Rational sum = 0;
      for (const auto& br : enumerate_bridges(d, x, y, L)) sum += bridge_probability_exact(d, green, br);
      Rational tail = 0;
      for (int k = 0; k < n; ++k) {
        tail += power[static_cast<std::size_t>(d.local(x) * n + k)] * green.exact(d.vertices()[static_cast<std::size_t>(k)], y);
      }
      EXPECT_EQ(sum, 1 - tail / green.exact(x, y)) << x << "->" << y;
    }
  }
}

TEST(BridgeProbability, ReversalSymmetry) {
  const auto b = make_builtin("grid:2x2", 5, 1);
  const Domain d = core_domain(b);
  const auto green = green_function(d, true);
  const auto& iota = *b.graph->involution();
  for (const auto& br : enumerate_bridges(d, 0, 3, 6)) {
    EXPECT_EQ(bridge_probability_exact(d, green, br), bridge_probability_exact(d, green, reverse_bridge(br, iota)));
  }
  EXPECT_EQ(enumerate_bridges(d, 0, 3, 6).size(), enumerate_bridges(d, 3, 0, 6).size());
}

TEST(BridgeSampler, SelfEdgeLengthLaw) {
  const auto b = make_builtin("single", 2, 1);
  EXPECT_GT(length_law_p_value(core_domain(b), 0, 0, 12, 100000, 2), 1e-3);
}

TEST(BridgeSampler, LengthLawsOnFixtureDomains) {
  const auto path = make_builtin("path:3", 3, 1);
  EXPECT_GT(length_law_p_value(core_domain(path), 0, 2, 14, 100000, 3), 1e-3);
  const auto cycle = make_builtin("cycle:4", 3, 1);
  EXPECT_GT(length_law_p_value(core_domain(cycle), 0, 0, 14, 100000, 4), 1e-3);
  const auto grid = make_builtin("grid:2x3", 4, 1);
  EXPECT_GT(length_law_p_value(core_domain(grid), 0, 5, 10, 100000, 5), 1e-3);
}

TEST(BridgeSampler, PathDistributionMatchesEnumeration) {
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d = core_domain(b);
  const auto green = green_function(d);
  std::map<EdgePath, double> exact;
  double covered = 0;
  for (const auto& br : enumerate_bridges(d, 0, 2, 6)) {
    exact[br.path] = bridge_probability(d, green, br);
    covered += exact[br.path];
  }
  const EdgePath longer{-1};
  exact[longer] = 1 - covered;
  BridgeSampler sampler(d);
  Rng rng(6);
  std::map<EdgePath, long> counts;
  for (int i = 0; i < 100000; ++i) {
    const auto br = sampler.sample(0, 2, rng);
    ++counts[br.length() <= 6 ? br.path : longer];
  }
  EXPECT_LT(total_variation(normalize_counts(counts), exact), 0.01);
}

TEST(BridgeSampler, UnreachableTargetThrows) {
  BridgeSampler sampler(two_components());
  Rng rng(7);
  EXPECT_THROW(sampler.sample(0, 2, rng), std::invalid_argument);
}

TEST(Enumeration, PermutationsAndPairings) {
  EXPECT_EQ(all_permutations(4).size(), 24u);
  EXPECT_EQ(all_permutations(0).size(), 1u);
  const auto pairings = all_pairings(6);
  EXPECT_EQ(pairings.size(), 15u);
  for (const auto& t : pairings) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      EXPECT_LT(t[k].first, t[k].second);
      if (k > 0) EXPECT_LT(t[k - 1].first, t[k].first);
    }
  }
  EXPECT_EQ(all_pairings(0).size(), 1u);
  EXPECT_THROW(all_pairings(3), std::invalid_argument);
}

TEST(UnorderedBridge, SingleBridgeReduces) {
  const auto b = make_builtin("path:3", 3, 1);
  BridgeSampler sampler(core_domain(b));
  Rng r1(8);
  const auto family = sample_unordered_bridge(sampler, {0}, {2}, r1);
  EXPECT_EQ(family.permutation, std::vector<int>{0});
  ASSERT_EQ(family.bridges.size(), 1u);
  EXPECT_EQ(family.bridges[0].from, 0);
  EXPECT_EQ(family.bridges[0].to, 2);
}

TEST(UnorderedBridge, RepeatedTargetGivesEqualPermutations) {
  const auto b = make_builtin("path:3", 3, 1);
  BridgeSampler sampler(core_domain(b));
  Rng rng(9);
  const int n = 100000;
  int identity = 0;
  for (int i = 0; i < n; ++i) {
    identity += sample_unordered_bridge(sampler, {0, 2}, {1, 1}, rng).permutation[0] == 0 ? 1 : 0;
  }
  EXPECT_NEAR(identity / static_cast<double>(n), 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(UnorderedBridge, PermutationFrequenciesFollowGreenRatio) {
  const auto b = make_builtin("path:4", 3, 1);
  BridgeSampler sampler(core_domain(b));
  const auto& G = sampler.green();
  const double keep = G(0, 1) * G(3, 2);
  const double swap = G(0, 2) * G(3, 1);
  const double p = keep / (keep + swap);
  Rng rng(10);
  const int n = 100000;
  int identity = 0;
  for (int i = 0; i < n; ++i) {
    identity += sample_unordered_bridge(sampler, {0, 3}, {1, 2}, rng).permutation[0] == 0 ? 1 : 0;
  }
  EXPECT_NEAR(identity / static_cast<double>(n), p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(UnorderedBridge, ConfigurationFrequencyIsProportionalToGPowerMinusK) {
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d = core_domain(b);
  BridgeSampler sampler(d);
  const std::vector<VertexId> X{0, 1}, Y{1, 2};
  double Z = 0;
  for (const auto& s : all_permutations(2)) Z += permutation_weight<double>(sampler.green(), X, Y, s);
  Rng rng(11);
  const int n = 100000;
  std::map<UnorderedBridgeFamily, long> counts;
  for (int i = 0; i < n; ++i) {
    auto f = sample_unordered_bridge(sampler, X, Y, rng);
    int K = 0;
    for (const auto& br : f.bridges) K += br.length();
    if (K <= 4) ++counts[f];
  }
  std::vector<double> observed, expected;
  double covered = 0;
  for (const auto& s : all_permutations(2)) {
    for (const auto& b0 : enumerate_bridges(d, X[0], Y[static_cast<std::size_t>(s[0])], 4)) {
      for (const auto& b1 : enumerate_bridges(d, X[1], Y[static_cast<std::size_t>(s[1])], 4 - b0.length())) {
        const UnorderedBridgeFamily f{s, {b0, b1}};
        const double p = std::pow(3.0, -(b0.length() + b1.length())) / Z;
        covered += p;
        observed.push_back(counts.count(f) ? static_cast<double>(counts[f]) : 0.0);
        expected.push_back(n * p);
      }
    }
  }
  double seen = 0;
  for (const auto& [f, c] : counts) seen += static_cast<double>(c);
  observed.push_back(n - seen);
  expected.push_back(n * (1 - covered));
  EXPECT_GT(chi_square_gof(observed, expected).p_value, 1e-3);
}

TEST(UnorderedBridge, Errors) {
  BridgeSampler sampler(two_components());
  Rng rng(12);
  EXPECT_THROW(sample_unordered_bridge(sampler, {0, 1}, {2, 3}, rng), std::invalid_argument);
  EXPECT_THROW(sample_unordered_bridge(sampler, {0}, {1, 2}, rng), std::invalid_argument);
  const std::vector<VertexId> many(9, 0);
  EXPECT_THROW(sample_unordered_bridge(sampler, many, many, rng), BudgetExceeded);
}

TEST(ZBridge, TwoPointsReduceToOneBridge) {
  const auto b = make_builtin("path:3", 3, 1);
  BridgeSampler sampler(core_domain(b));
  Rng rng(13);
  const auto f = sample_z_bridge(sampler, {2, 0}, rng);
  ASSERT_EQ(f.pairing.size(), 1u);
  EXPECT_EQ(f.pairing[0], std::make_pair(0, 1));
  EXPECT_EQ(f.bridges[0].from, 2);
  EXPECT_EQ(f.bridges[0].to, 0);
}

TEST(ZBridge, DegenerateWeightsForceThePairing) {
  BridgeSampler sampler(two_components());
  Rng rng(14);
  for (int i = 0; i < 200; ++i) {
    const auto f = sample_z_bridge(sampler, {0, 1, 2, 3}, rng);
    EXPECT_EQ(f.pairing, (std::vector<std::pair<int, int>>{{0, 1}, {2, 3}}));
  }
}

TEST(ZBridge, PairingFrequenciesFollowGreenProducts) {
  const auto b = make_builtin("cycle:4", 3, 1);
  BridgeSampler sampler(core_domain(b));
  const std::vector<VertexId> Z{0, 1, 2, 3};
  const auto pairings = all_pairings(4);
  std::vector<double> w;
  double total = 0;
  for (const auto& t : pairings) {
    w.push_back(pairing_weight<double>(sampler.green(), Z, t));
    total += w.back();
  }
  Rng rng(15);
  const int n = 100000;
  std::map<std::vector<std::pair<int, int>>, int> counts;
  for (int i = 0; i < n; ++i) ++counts[sample_z_bridge(sampler, Z, rng).pairing];
  for (std::size_t k = 0; k < pairings.size(); ++k) {
    const double p = w[k] / total;
    EXPECT_NEAR(counts[pairings[k]] / static_cast<double>(n), p, 3 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(ZBridge, BridgesReadFromLowerSlot) {
  const auto b = make_builtin("cycle:3", 3, 1);
  BridgeSampler sampler(core_domain(b));
  const std::vector<VertexId> Z{1, 1, 0, 2};
  Rng rng(16);
  for (int i = 0; i < 500; ++i) {
    const auto f = sample_z_bridge(sampler, Z, rng);
    for (std::size_t k = 0; k < f.pairing.size(); ++k) {
      EXPECT_EQ(f.bridges[k].from, Z[static_cast<std::size_t>(f.pairing[k].first)]);
      EXPECT_EQ(f.bridges[k].to, Z[static_cast<std::size_t>(f.pairing[k].second)]);
      EXPECT_TRUE(is_bridge_in(sampler.domain(), f.bridges[k]));
    }
  }
}

TEST(BridgeTimes, InteriorExponentials) {
  Rng rng(17);
  const std::vector<Bridge> bridges{{0, 0, {}}, {0, 1, {3}}, {0, 0, {1, 2, 3, 4, 5}}};
  RunningStats s;
  for (int i = 0; i < 20000; ++i) {
    const auto t = bridge_holding_times(bridges, 4, rng);
    ASSERT_EQ(t[0].size(), 0u);
    ASSERT_EQ(t[1].size(), 0u);
    ASSERT_EQ(t[2].size(), 4u);
    for (double x : t[2]) s.add(x);
  }
  EXPECT_NEAR(s.mean(), 0.25, 3 * s.standard_error());
}

TEST(BridgeDump, Json) {
  const auto b = make_builtin("cycle:3", 2);
  const UnorderedBridgeFamily f{{1, 0}, {{0, 1, {0}}, {1, 1, {}}}};
  auto j = to_json(f, *b.graph);
  EXPECT_EQ(j.dump(),
            R"({"permutation":[1,0],"bridges":[{"from":0,"to":1,"edges":[0]},{"from":1,"to":1,"edges":[]}]})");
  add_durations(j, {{}, {}});
  EXPECT_EQ(j["durations"].size(), 2u);
  const ZBridgeFamily z{{{0, 1}}, {{0, 0, {}}}};
  EXPECT_EQ(to_json(z, *b.graph).dump(), R"({"pairing":[[0,1]],"bridges":[{"from":0,"to":0,"edges":[]}]})");
}
