#pragma once

#include <nlohmann/json.hpp>

#include <compare>
#include <memory>
#include <utility>
#include <vector>

#include "loopsoup/graph.hpp"
#include "loopsoup/green.hpp"
#include "loopsoup/loops.hpp"
#include "loopsoup/rng.hpp"

namespace loopsoup {

/// Nearest-neighbour path from `from` to `to`; empty path iff zero length.
struct Bridge {
  VertexId from = -1;
  VertexId to = -1;
  EdgePath path;

  int length() const { return static_cast<int>(path.size()); }
  auto operator<=>(const Bridge&) const = default;
};

/// Endpoints consistent with the path and every step usable in the domain.
bool is_bridge_in(const Domain& domain, const Bridge& bridge);

/// g^{-n} / G_D(x, y); zero for paths that leave the domain. Throws
/// std::invalid_argument when x, y are in D but y is unreachable from x.
double bridge_probability(const Domain& domain, const GreenMatrix& green, const Bridge& bridge);
Rational bridge_probability_exact(const Domain& domain, const GreenMatrix& green, const Bridge& bridge);

/// All bridges x -> y of length at most max_length, shortest first.
std::vector<Bridge> enumerate_bridges(const Domain& domain, VertexId x, VertexId y, int max_length);

/// Reversal through ι: same edges backwards, endpoints swapped.
Bridge reverse_bridge(const Bridge& bridge, const ReversalInvolution& iota);

/// Doob-transformed walk: from z the next step along e goes to w with
/// probability G(w, y) / (g G(z, y)); at y the walk stops with probability
/// 1 / G(y, y).
class BridgeSampler {
 public:
  explicit BridgeSampler(Domain domain);
  BridgeSampler(Domain domain, GreenMatrix green);

  Bridge sample(VertexId x, VertexId y, Rng& rng) const;
  const Domain& domain() const { return *domain_; }
  const GreenMatrix& green() const { return green_; }

 private:
  std::shared_ptr<const Domain> domain_;
  GreenMatrix green_;
};

inline constexpr int kMaxPermutationSize = 8;
inline constexpr int kMaxPairingPoints = 12;

/// All permutations of {0..n-1} in lexicographic order.
std::vector<std::vector<int>> all_permutations(int n);
/// All perfect matchings of {0..m-1}; each pairing lists (i, j), i < j,
/// sorted by i.
std::vector<std::vector<std::pair<int, int>>> all_pairings(int m);

/// Bridge j runs from X[j] to Y[permutation[j]].
struct UnorderedBridgeFamily {
  std::vector<int> permutation;
  std::vector<Bridge> bridges;
  auto operator<=>(const UnorderedBridgeFamily&) const = default;
};

/// Bridge k joins Z[pairing[k].first] to Z[pairing[k].second] and is read in
/// that direction. The two ends are distinct slots even when they sit at the
/// same vertex, so the direction carries information.
struct ZBridgeFamily {
  std::vector<std::pair<int, int>> pairing;
  std::vector<Bridge> bridges;
  auto operator<=>(const ZBridgeFamily&) const = default;
};

/// Π_j G(X_j, Y_{s(j)}) and Π_k G(Z_{t_k^1}, Z_{t_k^2}).
template <class Scalar>
Scalar permutation_weight(const GreenMatrix& green, const std::vector<VertexId>& X,
                          const std::vector<VertexId>& Y, const std::vector<int>& s) {
  Scalar w = 1;
  for (std::size_t j = 0; j < X.size(); ++j) w *= green.at<Scalar>(X[j], Y[static_cast<std::size_t>(s[j])]);
  return w;
}

template <class Scalar>
Scalar pairing_weight(const GreenMatrix& green, const std::vector<VertexId>& Z,
                      const std::vector<std::pair<int, int>>& t) {
  Scalar w = 1;
  for (const auto& [a, b] : t) {
    w *= green.at<Scalar>(Z[static_cast<std::size_t>(a)], Z[static_cast<std::size_t>(b)]);
  }
  return w;
}

/// σ ∝ Π G(X_j, Y_{σ(j)}) over all N! permutations, then independent bridges.
/// Throws BudgetExceeded above kMaxPermutationSize and std::invalid_argument
/// when every permutation has weight zero or the sizes differ.
UnorderedBridgeFamily sample_unordered_bridge(const BridgeSampler& sampler, const std::vector<VertexId>& X,
                                              const std::vector<VertexId>& Y, Rng& rng);
/// τ ∝ Π G over all (2N-1)!! pairings, then unoriented bridges.
ZBridgeFamily sample_z_bridge(const BridgeSampler& sampler, const std::vector<VertexId>& Z, Rng& rng);

/// n - 1 interior Exp(mean 1/g) durations per bridge of length n.
std::vector<std::vector<double>> bridge_holding_times(const std::vector<Bridge>& bridges, int g, Rng& rng);

nlohmann::ordered_json to_json(const Bridge& bridge, const OrientedMultigraph& graph);
nlohmann::ordered_json to_json(const UnorderedBridgeFamily& family, const OrientedMultigraph& graph);
nlohmann::ordered_json to_json(const ZBridgeFamily& family, const OrientedMultigraph& graph);
/// Adds a "durations" array to a family dump.
void add_durations(nlohmann::ordered_json& dump, const std::vector<std::vector<double>>& durations);

}  // namespace loopsoup
