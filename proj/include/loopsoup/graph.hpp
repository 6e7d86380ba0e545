#pragma once

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace loopsoup {

using VertexId = int;
/// Position of an edge in the graph's id-sorted edge list. Comparing indices
/// therefore compares edge ids.
using EdgeIndex = int;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EdgeSpec {
  int id = 0;
  VertexId tail = 0;
  VertexId head = 0;
  bool stationary = false;
  /// Id of the reversed edge; absent on an unoriented graph means the edge is
  /// its own reversal (only legal for self-edges).
  std::optional<int> rev;
};

struct Edge {
  int id = 0;
  VertexId tail = 0;
  VertexId head = 0;
  bool stationary = false;
};

/// Edge-reversal map ι with ι(ι(e)) = e and ι(e): head(e) -> tail(e).
class ReversalInvolution {
 public:
  ReversalInvolution() = default;
  explicit ReversalInvolution(std::vector<EdgeIndex> map) : map_(std::move(map)) {}

  EdgeIndex operator()(EdgeIndex e) const { return map_[static_cast<std::size_t>(e)]; }
  bool fixed(EdgeIndex e) const { return (*this)(e) == e; }
  std::size_t size() const { return map_.size(); }
  const std::vector<EdgeIndex>& map() const { return map_; }

 private:
  std::vector<EdgeIndex> map_;
};

class OrientedMultigraph {
 public:
  /// Validates ids and endpoints; sorts edges by id. The graph is unoriented
  /// when `unoriented` is set or any edge carries a `rev`; the involution is
  /// then validated.
  static OrientedMultigraph build(int vertex_count, std::vector<EdgeSpec> edges,
                                  bool unoriented = false);

  int vertex_count() const { return vertex_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const Edge& edge(EdgeIndex e) const { return edges_[static_cast<std::size_t>(e)]; }
  const std::vector<Edge>& edges() const { return edges_; }
  VertexId tail(EdgeIndex e) const { return edge(e).tail; }
  VertexId head(EdgeIndex e) const { return edge(e).head; }

  std::span<const EdgeIndex> out_edges(VertexId v) const {
    return out_[static_cast<std::size_t>(v)];
  }
  int out_degree(VertexId v) const { return static_cast<int>(out_edges(v).size()); }
  int max_out_degree() const;
  /// Common out-degree g, if every vertex has the same out-degree.
  std::optional<int> degree() const { return degree_; }
  /// g; throws GraphError when the graph is not regular.
  int g() const;

  EdgeIndex index_of_id(int id) const;
  /// ι for unoriented graphs, nullptr for purely oriented ones.
  const ReversalInvolution* involution() const { return involution_ ? &*involution_ : nullptr; }
  const ReversalInvolution& require_involution() const;

  std::vector<EdgeSpec> specs() const;

 private:
  int vertex_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeIndex>> out_;
  std::optional<int> degree_;
  std::optional<ReversalInvolution> involution_;
};

using GraphPtr = std::shared_ptr<const OrientedMultigraph>;

OrientedMultigraph build_graph(int vertex_count, std::vector<EdgeSpec> edges,
                               bool unoriented = false);

/// Adds (g_target - d(x)) stationary ι-fixed self-edges at every vertex.
OrientedMultigraph regularize_degree(const OrientedMultigraph& graph, int g_target);

/// Checks the involution laws against the graph's edge set; throws GraphError.
void validate_involution(const OrientedMultigraph& graph, const ReversalInvolution& iota);

/// Unoriented edge classes {e, ι(e)}, each represented by its smaller index.
class UnorientedView {
 public:
  UnorientedView(GraphPtr graph, ReversalInvolution iota);

  const OrientedMultigraph& graph() const { return *graph_; }
  const ReversalInvolution& involution() const { return iota_; }
  EdgeIndex representative(EdgeIndex e) const { return std::min(e, iota_(e)); }
  const std::vector<EdgeIndex>& classes() const { return classes_; }
  /// Contribution of the class to d(tail): 1 for a fixed self-edge, 2 for a
  /// swapped self-edge pair, 1 at each endpoint otherwise.
  int degree_contribution(EdgeIndex rep) const;

 private:
  GraphPtr graph_;
  ReversalInvolution iota_;
  std::vector<EdgeIndex> classes_;
};

UnorientedView unoriented_view(GraphPtr graph, const ReversalInvolution& iota);

/// Vertex subset D of a graph, optionally with some edges removed. Walks are
/// killed when they use an edge leaving D or a removed edge.
class Domain {
 public:
  Domain(GraphPtr graph, std::vector<VertexId> vertices, std::vector<EdgeIndex> removed = {});
  static Domain whole(GraphPtr graph);

  const OrientedMultigraph& graph() const { return *graph_; }
  const GraphPtr& graph_ptr() const { return graph_; }
  int g() const { return graph_->g(); }

  const std::vector<VertexId>& vertices() const { return vertices_; }
  int size() const { return static_cast<int>(vertices_.size()); }
  bool contains(VertexId v) const {
    return v >= 0 && v < static_cast<int>(local_.size()) && local_[static_cast<std::size_t>(v)] >= 0;
  }
  /// Position of v in vertices(), or -1.
  int local(VertexId v) const { return contains(v) ? local_[static_cast<std::size_t>(v)] : -1; }

  bool edge_removed(EdgeIndex e) const { return removed_mask_[static_cast<std::size_t>(e)]; }
  bool edge_usable(EdgeIndex e) const {
    return !edge_removed(e) && contains(graph_->tail(e)) && contains(graph_->head(e));
  }
  const std::vector<EdgeIndex>& removed_edges() const { return removed_; }
  std::vector<EdgeIndex> usable_edges() const;

  /// D minus the given vertices (removed edges kept).
  Domain without(std::span<const VertexId> vertices) const;
  /// Removes the given edges; on unoriented graphs ι-partners are removed too.
  Domain with_removed(std::span<const EdgeIndex> edges) const;

 private:
  GraphPtr graph_;
  std::vector<VertexId> vertices_;
  std::vector<int> local_;
  std::vector<EdgeIndex> removed_;
  std::vector<bool> removed_mask_;
};

}  // namespace loopsoup
