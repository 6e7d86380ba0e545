#include <gtest/gtest.h>

#include <cmath>

#include "loopsoup/rng.hpp"
#include "loopsoup/stats.hpp"

using namespace loopsoup;

TEST(ChiSquare, SurvivalFunction) {
  EXPECT_NEAR(chi_square_sf(3.841458820694124, 1), 0.05, 1e-12);
  EXPECT_NEAR(chi_square_sf(2.0, 2), std::exp(-1.0), 1e-12);
  EXPECT_EQ(chi_square_sf(0.0, 3), 1.0);
}

TEST(ChiSquare, PoolsThinCells) {
  const std::vector<double> obs{50, 48, 1, 0, 1};
  const std::vector<double> exp{49, 49, 1, 0.5, 0.5};
  const auto r = chi_square_gof(obs, exp);
  EXPECT_EQ(r.cells, 2);
  EXPECT_EQ(r.dof, 1);
  EXPECT_GT(r.p_value, 0.5);
}

TEST(ChiSquare, DetectsWrongLaw) {
  const std::vector<double> obs{700, 300};
  const std::vector<double> exp{500, 500};
  EXPECT_LT(chi_square_gof(obs, exp).p_value, 1e-10);
}

TEST(ChiSquare, IndependenceOfProductTable) {
  std::vector<std::vector<double>> table{{100, 200, 1}, {200, 400, 2}, {0, 0, 0}};
  const auto r = chi_square_independence(table);
  EXPECT_EQ(r.dof, 1);
  EXPECT_GT(r.p_value, 0.99);
  const auto dependent = chi_square_independence({{100, 10}, {10, 100}});
  EXPECT_LT(dependent.p_value, 1e-10);
}

TEST(ChiSquare, UniformSamplesPass) {
  Rng rng(1);
  std::vector<double> obs(10, 0.0), exp(10, 1000.0);
  for (int i = 0; i < 10000; ++i) obs[static_cast<std::size_t>(rng.below(10))] += 1;
  EXPECT_GT(chi_square_gof(obs, exp).p_value, 1e-3);
}

TEST(Kolmogorov, KnownQuantiles) {
  EXPECT_NEAR(kolmogorov_sf(1.3580986393225507), 0.05, 1e-6);
  EXPECT_NEAR(kolmogorov_sf(1.6276236115189502), 0.01, 1e-6);
  EXPECT_EQ(kolmogorov_sf(0.0), 1.0);
}

TEST(Kolmogorov, SameLawPassesShiftFails) {
  Rng rng(2);
  std::vector<double> a, b, c;
  for (int i = 0; i < 5000; ++i) {
    a.push_back(rng.uniform());
    b.push_back(rng.uniform());
    c.push_back(rng.uniform() + 0.1);
  }
  EXPECT_GT(ks_two_sample(a, b).p_value, 1e-3);
  EXPECT_LT(ks_two_sample(a, c).p_value, 1e-10);
  EXPECT_GT(ks_one_sample(a, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value, 1e-3);
}

TEST(RunningStatsTest, MeanAndVariance) {
  RunningStats s;
  for (double x : {1.0, 2.0, 3.0, 4.0}) s.add(x);
  EXPECT_DOUBLE_EQ(s.mean(), 2.5);
  EXPECT_DOUBLE_EQ(s.variance(), 5.0 / 3.0);
}

TEST(TotalVariation, DisjointAndEqual) {
  std::map<int, double> p{{0, 0.5}, {1, 0.5}}, q{{2, 1.0}};
  EXPECT_DOUBLE_EQ(total_variation(p, q), 1.0);
  EXPECT_DOUBLE_EQ(total_variation(p, p), 0.0);
}

TEST(Quantiles, EqualFilledBins) {
  std::vector<double> v;
  for (int i = 0; i < 1000; ++i) v.push_back(i);
  const auto edges = quantile_edges(v, 4);
  ASSERT_EQ(edges.size(), 3u);
  std::vector<int> fill(4, 0);
  for (double x : v) ++fill[static_cast<std::size_t>(bin_of(x, edges))];
  for (int f : fill) EXPECT_EQ(f, 250);
}
