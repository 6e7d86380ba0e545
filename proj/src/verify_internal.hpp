#pragma once

#include <algorithm>
#include <string>
#include <thread>
#include <vector>

#include "loopsoup/verify.hpp"

namespace loopsoup::detail {

inline Rational green_entry(const GreenMatrix& green, VertexId x, VertexId y) {
  return green.has_exact() ? green.exact(x, y) : Rational(green(x, y));
}

inline GreenMatrix green_for(const Domain& d) { return green_function(d, d.size() <= kMaxExactDomain); }

/// Bridge families with weight g^{-total length}, total length <= cap, and
/// the normaliser Σ Π G over all permutations or pairings, so that
/// weight / normaliser is the bridge-measure probability.
template <class Family>
struct FamilyList {
  std::vector<std::pair<Family, Rational>> items;
  Rational normalizer = 0;

  Rational truncation_mass() const {
    Rational kept = 0;
    for (const auto& [f, w] : items) kept += w;
    return normalizer == 0 ? Rational(0) : Rational(1 - kept / normalizer);
  }
};

FamilyList<UnorderedBridgeFamily> permutation_families(const Domain& domain, const GreenMatrix& green,
                                                       const std::vector<VertexId>& X, const std::vector<VertexId>& Y,
                                                       int cap);
FamilyList<ZBridgeFamily> pairing_families(const Domain& domain, const GreenMatrix& green,
                                           const std::vector<VertexId>& Z, int cap);

/// Label-free view of a bridge family: its bridges, sorted. Unoriented
/// bridges are first put in their smaller direction.
std::vector<Bridge> arc_key(const std::vector<Bridge>& bridges, const ReversalInvolution* iota);

int total_length(const std::vector<Bridge>& bridges);
int total_length(const std::vector<Excursion>& pieces);

std::string path_key(const EdgePath& path);
std::string excursions_key(const std::vector<Excursion>& pieces);

/// Loop visits every vertex set in the list at least once / at least two.
bool visits(const OrientedMultigraph& g, const EdgePath& loop, std::span<const VertexId> set);

TestReport make_report(std::string prop, VerifyMode mode, std::string statistic_name, const VerifyParams& params);
inline const char* mode_name(VerifyMode m) { return m == VerifyMode::Exact ? "exact" : "monte-carlo"; }

/// Runs body(begin, end, worker_result) over [0, n) in fixed blocks and merges
/// the block results in block order, so the outcome does not depend on the
/// number of threads.
template <class Acc, class Body, class Merge>
Acc run_blocks(long n, int threads, Body body, Merge merge) {
  constexpr long kBlock = 4096;
  const long blocks = (n + kBlock - 1) / kBlock;
  std::vector<Acc> results(static_cast<std::size_t>(blocks));
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(blocks)));
  auto run = [&](int w) {
    for (long b = w; b < blocks; b += workers) {
      body(b * kBlock, std::min(n, (b + 1) * kBlock), results[static_cast<std::size_t>(b)]);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  Acc total{};
  for (auto& r : results) merge(total, r);
  return total;
}

/// Adjusted p-value min(1, m · min p).
inline double bonferroni(const std::vector<double>& p) {
  if (p.empty()) return 1.0;
  return std::min(1.0, *std::min_element(p.begin(), p.end()) * static_cast<double>(p.size()));
}

}  // namespace loopsoup::detail
