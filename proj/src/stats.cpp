#include "loopsoup/stats.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace loopsoup {

double chi_square_sf(double x, int dof) {
  if (dof <= 0) return 1.0;
  if (x <= 0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), x));
}

ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected,
                               double min_expected, int fitted) {
  if (observed.size() != expected.size()) throw std::invalid_argument("cell count mismatch");
  std::vector<std::size_t> order(observed.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return expected[a] < expected[b]; });
  std::vector<std::pair<double, double>> pooled;  // (observed, expected)
  double obs = 0;
  double exp = 0;
  for (std::size_t i : order) {
    obs += observed[i];
    exp += expected[i];
    if (exp >= min_expected) {
      pooled.emplace_back(obs, exp);
      obs = exp = 0;
    }
  }
  if (exp > 0 || obs > 0) {
    if (pooled.empty()) pooled.emplace_back(obs, exp);
    else {
      pooled.back().first += obs;
      pooled.back().second += exp;
    }
  }
  ChiSquareResult r;
  r.cells = static_cast<int>(pooled.size());
  for (const auto& [o, e] : pooled) {
    if (e > 0) r.statistic += (o - e) * (o - e) / e;
    else if (o > 0) r.statistic = std::numeric_limits<double>::infinity();
  }
  r.dof = r.cells - 1 - fitted;
  r.p_value = std::isinf(r.statistic) ? 0.0 : chi_square_sf(r.statistic, r.dof);
  return r;
}

namespace {

double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::size_t smallest_line(const std::vector<std::vector<double>>& lines, std::size_t skip) {
  std::size_t best = skip == 0 ? 1 : 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i != skip && sum_of(lines[i]) < sum_of(lines[best])) best = i;
  }
  return best;
}

// Adds the smallest line into the next smallest one.
void merge_smallest(std::vector<std::vector<double>>& lines) {
  const std::size_t a = smallest_line(lines, lines.size());
  const std::size_t b = smallest_line(lines, a);
  for (std::size_t j = 0; j < lines[a].size(); ++j) lines[b][j] += lines[a][j];
  lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(a));
}

std::vector<std::vector<double>> transpose(const std::vector<std::vector<double>>& t) {
  if (t.empty()) return {};
  std::vector<std::vector<double>> out(t[0].size(), std::vector<double>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t[i].size(); ++j) out[j][i] = t[i][j];
  }
  return out;
}

double min_margin(const std::vector<std::vector<double>>& lines) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& l : lines) m = std::min(m, sum_of(l));
  return m;
}

}  // namespace

ChiSquareResult chi_square_independence(std::vector<std::vector<double>> table, double min_expected) {
  ChiSquareResult res;
  std::erase_if(table, [](const auto& r) { return sum_of(r) == 0.0; });
  auto cols = transpose(table);
  std::erase_if(cols, [](const auto& c) { return sum_of(c) == 0.0; });
  table = transpose(cols);
  double total = 0;
  for (const auto& r : table) total += sum_of(r);
  if (total <= 0) return res;
  // Pool the thinnest rows or columns until every expected cell is large
  // enough, never going below a 2x2 table.
  for (;;) {
    const std::size_t R = table.size();
    const std::size_t C = R ? table[0].size() : 0;
    const double mr = min_margin(table);
    const double mc = min_margin(transpose(table));
    if (mr * mc / total >= min_expected) break;
    if (R > 2 && (mr <= mc || C <= 2)) {
      merge_smallest(table);
    } else if (C > 2) {
      auto t = transpose(table);
      merge_smallest(t);
      table = transpose(t);
    } else {
      break;
    }
  }
  const std::size_t R = table.size();
  const std::size_t C = R ? table[0].size() : 0;
  res.cells = static_cast<int>(R * C);
  if (R < 2 || C < 2) return res;
  std::vector<double> row(R, 0.0), col(C, 0.0);
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      row[i] += table[i][j];
      col[j] += table[i][j];
    }
  }
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      const double e = row[i] * col[j] / total;
      if (e > 0) res.statistic += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  }
  res.dof = static_cast<int>((R - 1) * (C - 1));
  res.p_value = chi_square_sf(res.statistic, res.dof);
  return res;
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS test needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  return {d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)};
}

KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw std::invalid_argument("KS test needs a nonempty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sq = std::sqrt(n);
  return {d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)};
}

std::vector<double> quantile_edges(std::vector<double> values, int bins) {
  std::vector<double> edges;
  if (values.empty() || bins <= 1) return edges;
  std::sort(values.begin(), values.end());
  for (int k = 1; k < bins; ++k) {
    const std::size_t idx = values.size() * static_cast<std::size_t>(k) / static_cast<std::size_t>(bins);
    const double edge = values[std::min(idx, values.size() - 1)];
    if (edges.empty() || edge > edges.back()) edges.push_back(edge);
  }
  return edges;
}

int bin_of(double x, const std::vector<double>& edges) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

}  // namespace loopsoup
