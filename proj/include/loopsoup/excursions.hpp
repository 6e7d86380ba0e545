#pragma once

#include <nlohmann/json.hpp>

#include <compare>
#include <span>
#include <vector>

#include "loopsoup/bridges.hpp"
#include "loopsoup/soup.hpp"

namespace loopsoup {

/// A piece of a loop between two marked visits. `from` is the tail of the
/// first step and `to` the head of the last.
struct Excursion {
  EdgePath path;
  VertexId from = -1;
  VertexId to = -1;
  auto operator<=>(const Excursion&) const = default;
};

/// The loops of a soup that touch both F1 and F2, cut at their visits to F2.
/// Excursions are sorted by edge sequence (unoriented ones are first put in
/// the smaller of their two directions).
///
/// Oriented: X[j] = eta[j].to, Y[j] = eta[j].from and beta_truth runs from
/// X[j] to Y[σ(j)], where η_{σ(j)} is the next excursion along the loop.
/// Unoriented: Z[2j] = eta[j].from, Z[2j+1] = eta[j].to and z_beta_truth
/// pairs the extremities joined by the loops.
struct ExcursionDecomposition {
  Orientation orientation = Orientation::Oriented;
  std::vector<Excursion> eta;
  int M = 0;
  std::vector<VertexId> X, Y, Z;
  UnorderedBridgeFamily beta_truth;
  ZBridgeFamily z_beta_truth;
  /// Canonical keys of the touching loops and of all other loops, sorted.
  std::vector<EdgePath> touching;
  std::vector<EdgePath> residual;

  int N() const { return static_cast<int>(eta.size()); }
};

/// Throws std::invalid_argument unless F1, F2 are nonempty, disjoint and in D.
ExcursionDecomposition decompose(const LoopSoup& soup, std::span<const VertexId> F1,
                                 std::span<const VertexId> F2);

/// Closes excursions with bridges and returns the canonical loop keys,
/// sorted: oriented keys for permutation families, unoriented keys for
/// Z-families. Throws std::invalid_argument when endpoints do not match.
std::vector<EdgePath> reassemble(const OrientedMultigraph& graph, const std::vector<Excursion>& eta,
                                 const UnorderedBridgeFamily& beta);
/// Unoriented version; eta[j] runs from Z[2j] to Z[2j+1].
std::vector<EdgePath> reassemble(const OrientedMultigraph& graph, const std::vector<Excursion>& eta,
                                 const ZBridgeFamily& beta);

/// Crossings between marked sets: pieces of loops from one set to another
/// whose interior avoids every marked set.
///
/// Oriented (two sets): forward = 1 -> 2 crossings, backward = 2 -> 1, each
/// sorted. X / Y' are the ends / starts of forward crossings, Y / X' the
/// starts / ends of backward ones. outer_truth joins X[j] to Y[σ(j)] in
/// D \ F1, inner_truth joins X'[j] to Y'[τ(j)] in D \ F2.
struct OrientedCrossings {
  std::vector<Excursion> forward, backward;
  std::vector<VertexId> X, Y, X_inner, Y_inner;
  UnorderedBridgeFamily outer_truth, inner_truth;
};

OrientedCrossings extract_crossings(const LoopSoup& soup, std::span<const VertexId> F1,
                                    std::span<const VertexId> F2);
std::vector<EdgePath> reassemble(const OrientedMultigraph& graph, const OrientedCrossings& crossings,
                                 const UnorderedBridgeFamily& outer, const UnorderedBridgeFamily& inner);

/// Unoriented, any number of sets. Crossings are read from the lower set
/// index to the higher and sorted. Z[k] lists the extremities in F_k in
/// crossing order; z_truth[k] pairs them by the loop pieces inside
/// D \ (other sets).
struct UnorientedCrossings {
  std::vector<Excursion> crossings;
  std::vector<std::pair<int, int>> sets;  // (lower, higher) set of each crossing
  std::vector<std::vector<VertexId>> Z;
  std::vector<ZBridgeFamily> z_truth;
};

UnorientedCrossings extract_unoriented_crossings(const LoopSoup& soup,
                                                 const std::vector<std::vector<VertexId>>& sets);
/// Closes crossings with one Z-family per set.
std::vector<EdgePath> reassemble(const OrientedMultigraph& graph, const UnorientedCrossings& crossings,
                                 const std::vector<ZBridgeFamily>& families);

/// Jumps of an unoriented soup along removed edges. Edges are given by any
/// member of their ι-class; counts[i] jumps of edge i contribute
/// Z = (tail, head) of the representative, jump by jump, edge by edge.
struct EdgeJumpRecord {
  std::vector<EdgeIndex> edges;  // representatives
  std::vector<int> counts;
  std::vector<VertexId> Z;
  /// Pairing of Z by the loop pieces avoiding all removed edges.
  ZBridgeFamily beta_truth;
  std::vector<EdgePath> touching;
  std::vector<EdgePath> residual;
};

EdgeJumpRecord record_edge_jumps(const LoopSoup& soup, std::span<const EdgeIndex> removed);

/// Inverse of record_edge_jumps: glues the jumps back with the bridges.
std::vector<EdgePath> reassemble_jumps(const OrientedMultigraph& graph, const std::vector<EdgeIndex>& edges,
                                       const std::vector<int>& counts, const ZBridgeFamily& beta);

/// Continuous-time excursions away from a site set.
struct CtExcursion {
  Excursion skeleton;
  /// n - 1 holding times at the interior vertices.
  std::vector<double> interior;
  auto operator<=>(const CtExcursion&) const = default;
};

struct CtExcursionSet {
  std::vector<VertexId> sites;
  std::vector<double> local_times;
  /// Sorted; unoriented soups use the smaller direction.
  std::vector<CtExcursion> excursions;

  /// Excursion extremities at each site.
  std::vector<int> endpoint_counts() const;
  /// Excursions leaving minus excursions entering each site.
  std::vector<int> balance() const;
};

CtExcursionSet ct_excursions(const ContinuousTimeSoup& soup, std::span<const VertexId> sites);

nlohmann::ordered_json to_json(const ExcursionDecomposition& d, const OrientedMultigraph& graph);

}  // namespace loopsoup
