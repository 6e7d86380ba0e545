#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "loopsoup/green.hpp"
#include "loopsoup/stats.hpp"
#include "loopsoup/verify.hpp"

namespace loopsoup {
namespace {

using testing::domain_of;

const std::vector<VertexId> kF1{0}, kF2{1};

VerifyParams exact(int L_max, int max_pieces = 2) {
  VerifyParams p;
  p.L_max = L_max;
  p.max_pieces = max_pieces;
  return p;
}

const TestReport& find(const std::vector<TestReport>& reports, const std::string& prop) {
  for (const auto& r : reports) {
    if (r.prop == prop) return r;
  }
  throw std::out_of_range(prop);
}

void expect_as_expected(const std::vector<TestReport>& reports) {
  for (const auto& r : reports) EXPECT_TRUE(r.as_expected()) << to_json(r).dump(2);
}

TEST(ForEachConfiguration, WeightsArePoissonProbabilitiesUpToTheEmptySoup) {
  // Single vertex with one self-edge, g = 2: one loop class per length n,
  // mass 2^{-n}/n. With all lengths the weights sum to exp(Σ m) - 1 = 1.
  const auto b = make_builtin("single", 2, 1);
  const Domain d = domain_of(b);
  const auto catalog = enumerate_loops(d, 8, Orientation::Oriented);
  std::vector<std::size_t> all(catalog.classes.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Rational total = 0;
  int count = 0;
  for_each_configuration(catalog, Rational(1), 8, 8, all, [&](const Configuration& c, const Rational& w) {
    EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
    total += w;
    ++count;
  });
  // Configurations of total length <= 8 are partitions of 1..8: 1+2+3+5+7+11+15+22 = 66... with multiplicity
  // read as integer partitions of n for n = 1..8.
  EXPECT_EQ(count, 1 + 2 + 3 + 5 + 7 + 11 + 15 + 22);
  // Σ over partitions λ of n of Π m^k/k! with m_j = 2^{-j}/j is the coefficient
  // of t^n in exp(-log(1 - t/2)) = 1/(1 - t/2), i.e. 2^{-n}.
  Rational expected = 0;
  for (int n = 1; n <= 8; ++n) expected += inverse_power(2, static_cast<unsigned>(n));
  EXPECT_EQ(total, expected);
}

TEST(TotalVariation, DisjointAndEqualSupports) {
  std::map<int, Rational> p{{0, Rational(1, 2)}, {1, Rational(1, 2)}};
  std::map<int, Rational> q{{2, Rational(1)}};
  EXPECT_EQ(total_variation_exact(p, q), Rational(1));
  EXPECT_EQ(total_variation_exact(p, p), Rational(0));
}

TEST(Prop1Exact, PathOfThreeIsExactAndControlFails) {
  const auto b = make_builtin("path:3", 3, 1);
  const auto reports = verify_prop1(domain_of(b), kF1, kF2, exact(8));
  expect_as_expected(reports);
  EXPECT_EQ(find(reports, "prop1").statistic, 0.0);
  EXPECT_GT(find(reports, "prop1").details["conditioning_values"].get<int>(), 1);
  EXPECT_GT(find(reports, "prop1.control").statistic, 1e-6);
}

TEST(Prop2Exact, PathOfThreeIsExactAndControlFails) {
  const auto b = make_builtin("path:3", 3, 1);
  const auto reports = verify_prop2(domain_of(b), kF1, kF2, exact(8));
  expect_as_expected(reports);
  EXPECT_EQ(find(reports, "prop2").statistic, 0.0);
}

TEST(BridgeSideLaw, SumsToOneMinusTruncation) {
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d = domain_of(b);
  const auto& g = d.graph();
  // One excursion 1 -> 0 -> 1 away from F2 = {1}.
  const auto step = [&](VertexId a, VertexId c) {
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
      if (g.tail(e) == a && g.head(e) == c) return e;
    }
    throw std::logic_error("no edge");
  };
  const std::vector<Excursion> eta{{{step(1, 0), step(0, 1)}, 1, 1}};
  const auto law = bridge_side_law(d, kF1, eta, 4, Orientation::Oriented);
  EXPECT_EQ(law.total() + law.truncation_mass, Rational(1));
  EXPECT_GT(law.truncation_mass, 0);
}

TEST(Prop1bisExact, TwoSetsOnAPath) {
  const auto b = make_builtin("path:3", 3, 1);
  const auto reports = verify_prop1bis_3bis(domain_of(b), {{0}, {2}}, Orientation::Oriented, exact(8));
  expect_as_expected(reports);
  EXPECT_EQ(find(reports, "prop1bis").statistic, 0.0);
  EXPECT_EQ(find(reports, "prop1bis.factorization").statistic, 0.0);
  EXPECT_EQ(find(reports, "prop1bis.residual").statistic, 0.0);
}

TEST(Prop3bisExact, ThreeSetsOnACycle) {
  const auto b = make_builtin("cycle:4", 3, 1);
  const auto reports = verify_prop1bis_3bis(domain_of(b), {{0}, {1}, {2}}, Orientation::Unoriented, exact(8));
  expect_as_expected(reports);
  EXPECT_EQ(find(reports, "prop3bis").statistic, 0.0);
}

TEST(Prop5Exact, OneRemovedEdgeAndAllRemoved) {
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d = domain_of(b);
  const auto reports = verify_prop5(d, std::vector<EdgeIndex>{d.usable_edges().front()}, exact(8, 4));
  expect_as_expected(reports);
  EXPECT_EQ(find(reports, "prop5").statistic, 0.0);
  EXPECT_TRUE(find(reports, "prop5.all-removed").details["uniform_same_site_pairings"].get<bool>());
}

TEST(OccupationMarkov, ExactFactorisationOnACycle) {
  const auto b = make_builtin("cycle:4", 3, 1);
  for (auto o : {Orientation::Unoriented, Orientation::Oriented}) {
    const auto reports = verify_occupation_markov(domain_of(b), std::vector<VertexId>{0, 1}, o, exact(8));
    expect_as_expected(reports);
    for (const auto& r : reports) {
      EXPECT_EQ(r.details["exact_factorization"].get<bool>(), !r.positive_control) << r.prop;
    }
  }
}

TEST(Prop1MonteCarlo, AgreesWithTheBridgeLaw) {
  const auto b = make_builtin("path:3", 3, 1);
  auto params = exact(8);
  params.mode = VerifyMode::MonteCarlo;
  params.samples = 20000;
  const auto reports = verify_prop1(domain_of(b), kF1, kF2, params);
  expect_as_expected(reports);
  EXPECT_GT(find(reports, "prop1").details["bins"].size(), 1u);
}

VerifyParams monte_carlo(int L_max, long samples) {
  auto p = exact(L_max);
  p.mode = VerifyMode::MonteCarlo;
  p.samples = samples;
  p.seed = 7;
  return p;
}

TEST(MonteCarlo, Prop2AndProp5) {
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d = domain_of(b);
  expect_as_expected(verify_prop2(d, kF1, kF2, monte_carlo(8, 20000)));
  auto p5 = monte_carlo(8, 20000);
  p5.max_pieces = 4;
  const auto reports = verify_prop5(d, std::vector<EdgeIndex>{d.usable_edges().front()}, p5);
  expect_as_expected(reports);
  EXPECT_EQ(reports.size(), 2u);
}

TEST(MonteCarlo, CrossingsTwoAndThreeSets) {
  const auto path = make_builtin("path:3", 3, 1);
  const auto oriented = verify_prop1bis_3bis(domain_of(path), {{0}, {2}}, Orientation::Oriented, monte_carlo(8, 20000));
  expect_as_expected(oriented);
  const auto cycle = make_builtin("cycle:5", 3, 1);
  const auto unoriented =
      verify_prop1bis_3bis(domain_of(cycle), {{0}, {2}, {3}}, Orientation::Unoriented, monte_carlo(10, 20000));
  expect_as_expected(unoriented);
  for (const auto& r : unoriented) EXPECT_GT(r.details["bins_tested"].get<int>(), 0) << to_json(r).dump(2);
}

TEST(MonteCarlo, ThreadCountDoesNotChangeTheResult) {
  const auto b = make_builtin("path:3", 3, 1);
  auto one = monte_carlo(8, 10000);
  auto four = one;
  four.threads = 4;
  const auto a = verify_prop1(domain_of(b), kF1, kF2, one);
  const auto c = verify_prop1(domain_of(b), kF1, kF2, four);
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_json(a[i]), to_json(c[i]));
}

TEST(MonteCarlo, WrongIntensityIsDetected) {
  const auto b = make_builtin("path:3", 3, 1);
  auto params = monte_carlo(8, 100000);
  params.intensity = 2.0;
  EXPECT_FALSE(find(verify_prop1(domain_of(b), kF1, kF2, params), "prop1").pass);
}

TEST(Gff, SingleVertexVariance) {
  // One vertex, g = 2, one self-edge: G = 1 / (1 - 1/2) = 2.
  const auto b = make_builtin("single", 2, 1);
  const Domain d = domain_of(b);
  const GffSampler gff(d);
  EXPECT_NEAR(gff.covariance()(0, 0), 2.0, 1e-12);
  Rng rng(3, "gff");
  std::vector<double> draws;
  for (int i = 0; i < 20000; ++i) draws.push_back(gff.sample(rng)[0]);
  const auto ks = ks_one_sample(draws, [](double x) { return 0.5 * std::erfc(-x / 2.0); });
  EXPECT_GT(ks.p_value, 1e-3);
}

TEST(Gff, CovarianceMatchesGreenFunction) {
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d = domain_of(b);
  const GffSampler gff(d);
  Rng rng(4, "gff");
  const int n = 100000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const auto phi = gff.sample(rng);
    const Eigen::Map<const Eigen::VectorXd> v(phi.data(), 3);
    sum += v * v.transpose();
  }
  const Eigen::MatrixXd& G = gff.covariance();
  for (int x = 0; x < 3; ++x) {
    for (int y = 0; y < 3; ++y) {
      const double sd = std::sqrt((G(x, x) * G(y, y) + G(x, y) * G(x, y)) / n);
      EXPECT_NEAR(sum(x, y) / n, G(x, y), 3 * sd);
    }
  }
}

TEST(LeJan, OccupationIsHalfTheSquaredField) {
  const auto b = make_builtin("path:3", 3, 1);
  const auto reports = verify_lejan(domain_of(b), monte_carlo(6, 100000));
  expect_as_expected(reports);
  EXPECT_TRUE(find(reports, "lejan.control").positive_control);
}

TEST(ExcursionKernel, SingleSiteOnAPath) {
  // Site {1}: either a direct self-jump or a visit to one neighbour, held
  // there geometrically, then back.
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d = domain_of(b);
  const std::vector<VertexId> site{1};
  const auto H = excursion_kernel(d, site);
  const Eigen::MatrixXd P = killed_transition(d);
  double expected = P(1, 1);
  for (int v : {0, 2}) expected += P(1, v) * P(v, 1) / (1 - P(v, v));
  EXPECT_NEAR(H(0, 0), expected, 1e-12);
}

TEST(ConditionedCounts, ParityHoldsAndSingleSiteIsPoisson) {
  Eigen::MatrixXd H(2, 2);
  H << 0.2, 0.3, 0.1, 0.25;
  const std::vector<double> l{0.7, 1.3};
  Rng rng(5, "counts");
  for (int i = 0; i < 2000; ++i) {
    const auto c = sample_conditioned_excursion_counts(H, l, 3, rng);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[1] % 2, 0);
  }
  Eigen::MatrixXd one(1, 1);
  one << 0.4;
  RunningStats s;
  for (int i = 0; i < 20000; ++i) s.add(sample_conditioned_excursion_counts(one, std::vector<double>{1.5}, 2, rng)[0]);
  EXPECT_NEAR(s.mean(), 2 * 1.5 * 0.4, 4 * s.standard_error());
}

TEST(CtExcursions, ProposalOracleAgrees) {
  const auto b = make_builtin("path:3", 3, 1);
  for (const auto& sites : {std::vector<VertexId>{1}, std::vector<VertexId>{0, 2}}) {
    const auto reports = verify_ct_excursion_proposition(domain_of(b), sites, monte_carlo(8, 20000));
    expect_as_expected(reports);
    EXPECT_EQ(find(reports, "ct-excursions.parity").statistic, 0.0);
  }
}

TEST(RandomCurrents, TriangleBothOrientations) {
  const auto b = make_builtin("cycle:3", 3, 1);
  for (auto o : {Orientation::Unoriented, Orientation::Oriented}) {
    const auto reports = verify_random_currents(domain_of(b), o, monte_carlo(6, 20000));
    expect_as_expected(reports);
    EXPECT_EQ(reports[0].statistic, 0.0);
  }
}

TEST(Wilson, TreeInputErasesNothing) {
  // g = 1 and each vertex has its one edge towards the root: 0 -> 1 -> root.
  auto g = testing::share(build_graph(3, {{0, 0, 1, false, std::nullopt}, {1, 1, 2, false, std::nullopt}, {2, 2, 2, false, std::nullopt}}, false));
  const Domain d(g, {0, 1});
  Rng rng(6, "wilson");
  for (int i = 0; i < 100; ++i) {
    const auto r = wilson_ust(d, rng);
    EXPECT_TRUE(r.erased.loops.empty());
    EXPECT_EQ(r.parent, (std::vector<EdgeIndex>{0, 1}));
  }
}

TEST(Wilson, FourCycleTreesAndLoops) {
  const auto b = make_builtin("cycle:4", 2, 0);
  const Domain d(b.graph, {1, 2, 3});
  EXPECT_EQ(spanning_tree_count(d), 4.0);
  const auto reports = verify_wilson(d, monte_carlo(6, 100000));
  expect_as_expected(reports);
  EXPECT_EQ(find(reports, "wilson.trees").details["trees_observed"].get<int>(), 4);
}

TEST(ExactConditionalBeta, TwoIdenticalExcursionsGiveTheBridgeLaw) {
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d = domain_of(b);
  const auto& g = d.graph();
  const auto step = [&](VertexId a, VertexId c) {
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
      if (g.tail(e) == a && g.head(e) == c) return e;
    }
    throw std::logic_error("no edge");
  };
  const Excursion once{{step(1, 0), step(0, 1)}, 1, 1};
  const std::vector<Excursion> eta{once, once};
  auto oracle = exact_conditional_beta(d, kF1, kF2, eta, 8, Orientation::Oriented, Rational(1));
  auto bridges = bridge_side_law(d, kF1, eta, 4, Orientation::Oriented);
  bridges.normalize();
  EXPECT_GT(oracle.probabilities.size(), 2u);
  EXPECT_EQ(total_variation_exact(oracle.probabilities, bridges.probabilities), Rational(0));
}

TEST(ExactConditionalBeta, InfeasibleExcursionsThrow) {
  const auto b = make_builtin("path:3", 3, 1);
  const Domain d = domain_of(b);
  const std::vector<Excursion> eta{{{}, 2, 2}};
  EXPECT_THROW(exact_conditional_beta(d, kF1, kF2, eta, 6, Orientation::Oriented, Rational(1)), std::invalid_argument);
}

}  // namespace
}  // namespace loopsoup
