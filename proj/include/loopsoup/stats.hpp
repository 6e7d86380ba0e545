#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace loopsoup {

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int cells = 0;
};

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, int dof);

/// Goodness of fit. Cells are pooled (smallest expectation first) until each
/// pooled cell expects at least `min_expected`. `fitted` parameters reduce
/// the degrees of freedom further.
ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected,
                               double min_expected = 5.0, int fitted = 0);

/// Independence test on a contingency table; rows and columns with tiny
/// margins are pooled into their neighbours first.
ChiSquareResult chi_square_independence(std::vector<std::vector<double>> table,
                                        double min_expected = 5.0);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_sf(double lambda);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf);

/// Welford running mean and variance.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double standard_error() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Half the L1 distance between two (sub)distributions over the union of keys.
template <class Key>
double total_variation(const std::map<Key, double>& p, const std::map<Key, double>& q) {
  double sum = 0.0;
  auto a = p.begin();
  auto b = q.begin();
  while (a != p.end() || b != q.end()) {
    if (b == q.end() || (a != p.end() && a->first < b->first)) {
      sum += std::abs(a->second);
      ++a;
    } else if (a == p.end() || b->first < a->first) {
      sum += std::abs(b->second);
      ++b;
    } else {
      sum += std::abs(a->second - b->second);
      ++a;
      ++b;
    }
  }
  return sum / 2;
}

/// Empirical distribution from counts.
template <class Key>
std::map<Key, double> normalize_counts(const std::map<Key, long>& counts) {
  double total = 0.0;
  for (const auto& [k, c] : counts) total += static_cast<double>(c);
  std::map<Key, double> out;
  for (const auto& [k, c] : counts) out[k] = static_cast<double>(c) / total;
  return out;
}

/// Quantile bin edges splitting `values` into `bins` equally filled groups.
std::vector<double> quantile_edges(std::vector<double> values, int bins);
/// Index of the bin containing x for edges from quantile_edges.
int bin_of(double x, const std::vector<double>& edges);

}  // namespace loopsoup
