#include "loopsoup/graph.hpp"

#include <algorithm>
#include <unordered_map>

namespace loopsoup {

namespace {

std::string edge_label(int id) { return "edge " + std::to_string(id); }

}  // namespace

OrientedMultigraph OrientedMultigraph::build(int vertex_count, std::vector<EdgeSpec> specs,
                                             bool unoriented) {
  if (vertex_count <= 0) throw GraphError("graph needs at least one vertex");
  std::sort(specs.begin(), specs.end(),
            [](const EdgeSpec& a, const EdgeSpec& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < specs.size(); ++i) {
    if (specs[i].id == specs[i - 1].id) throw GraphError("duplicate " + edge_label(specs[i].id));
  }

  OrientedMultigraph g;
  g.vertex_count_ = vertex_count;
  g.out_.resize(static_cast<std::size_t>(vertex_count));
  std::unordered_map<int, EdgeIndex> by_id;
  bool any_rev = false;
  for (const auto& s : specs) {
    if (s.tail < 0 || s.tail >= vertex_count || s.head < 0 || s.head >= vertex_count) {
      throw GraphError(edge_label(s.id) + " has an endpoint outside [0, " +
                       std::to_string(vertex_count) + ")");
    }
    const auto index = static_cast<EdgeIndex>(g.edges_.size());
    by_id.emplace(s.id, index);
    g.edges_.push_back(Edge{s.id, s.tail, s.head, s.stationary});
    g.out_[static_cast<std::size_t>(s.tail)].push_back(index);
    any_rev = any_rev || s.rev.has_value();
  }

  const int d0 = g.out_degree(0);
  bool regular = true;
  for (VertexId v = 1; v < vertex_count; ++v) regular = regular && g.out_degree(v) == d0;
  if (regular) g.degree_ = d0;

  if (unoriented || any_rev) {
    std::vector<EdgeIndex> map(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& s = specs[i];
      if (!s.rev) {
        map[i] = static_cast<EdgeIndex>(i);
        continue;
      }
      auto it = by_id.find(*s.rev);
      if (it == by_id.end()) {
        throw GraphError(edge_label(s.id) + " reverses unknown edge " + std::to_string(*s.rev));
      }
      map[i] = it->second;
    }
    ReversalInvolution iota(std::move(map));
    validate_involution(g, iota);
    g.involution_ = std::move(iota);
  }
  return g;
}

int OrientedMultigraph::max_out_degree() const {
  int best = 0;
  for (const auto& out : out_) best = std::max(best, static_cast<int>(out.size()));
  return best;
}

int OrientedMultigraph::g() const {
  if (!degree_) throw GraphError("graph is not regular");
  return *degree_;
}

EdgeIndex OrientedMultigraph::index_of_id(int id) const {
  auto it = std::lower_bound(edges_.begin(), edges_.end(), id,
                             [](const Edge& e, int v) { return e.id < v; });
  if (it == edges_.end() || it->id != id) throw GraphError("no " + edge_label(id));
  return static_cast<EdgeIndex>(it - edges_.begin());
}

const ReversalInvolution& OrientedMultigraph::require_involution() const {
  if (!involution_) throw GraphError("graph has no reversal involution");
  return *involution_;
}

std::vector<EdgeSpec> OrientedMultigraph::specs() const {
  std::vector<EdgeSpec> out;
  out.reserve(edges_.size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    EdgeSpec s{e.id, e.tail, e.head, e.stationary, std::nullopt};
    if (involution_) {
      const EdgeIndex r = (*involution_)(static_cast<EdgeIndex>(i));
      if (r != static_cast<EdgeIndex>(i)) s.rev = edges_[static_cast<std::size_t>(r)].id;
    }
    out.push_back(s);
  }
  return out;
}

OrientedMultigraph build_graph(int vertex_count, std::vector<EdgeSpec> edges, bool unoriented) {
  return OrientedMultigraph::build(vertex_count, std::move(edges), unoriented);
}

OrientedMultigraph regularize_degree(const OrientedMultigraph& graph, int g_target) {
  if (graph.max_out_degree() > g_target) {
    throw GraphError("cannot regularize to degree " + std::to_string(g_target) +
                     ": a vertex already has out-degree " +
                     std::to_string(graph.max_out_degree()));
  }
  auto specs = graph.specs();
  int next_id = specs.empty() ? 0 : specs.back().id + 1;
  for (VertexId v = 0; v < graph.vertex_count(); ++v) {
    for (int k = graph.out_degree(v); k < g_target; ++k) {
      EdgeSpec s{next_id++, v, v, true, std::nullopt};
      specs.push_back(s);
    }
  }
  return OrientedMultigraph::build(graph.vertex_count(), std::move(specs),
                                   graph.involution() != nullptr);
}

void validate_involution(const OrientedMultigraph& graph, const ReversalInvolution& iota) {
  if (iota.size() != static_cast<std::size_t>(graph.edge_count())) {
    throw GraphError("involution size does not match edge count");
  }
  for (EdgeIndex e = 0; e < graph.edge_count(); ++e) {
    const EdgeIndex r = iota(e);
    const int id = graph.edge(e).id;
    if (r < 0 || r >= graph.edge_count()) throw GraphError(edge_label(id) + ": reversal out of range");
    if (iota(r) != e) throw GraphError(edge_label(id) + ": reversal is not an involution");
    if (graph.tail(r) != graph.head(e) || graph.head(r) != graph.tail(e)) {
      throw GraphError(edge_label(id) + ": reversal does not swap endpoints");
    }
    if (r == e && graph.tail(e) != graph.head(e)) {
      throw GraphError(edge_label(id) + " has no reverse edge");
    }
  }
}

UnorientedView::UnorientedView(GraphPtr graph, ReversalInvolution iota)
    : graph_(std::move(graph)), iota_(std::move(iota)) {
  validate_involution(*graph_, iota_);
  for (EdgeIndex e = 0; e < graph_->edge_count(); ++e) {
    if (representative(e) == e) classes_.push_back(e);
  }
}

int UnorientedView::degree_contribution(EdgeIndex rep) const {
  const Edge& e = graph_->edge(rep);
  if (e.tail != e.head) return 1;
  return iota_.fixed(rep) ? 1 : 2;
}

UnorientedView unoriented_view(GraphPtr graph, const ReversalInvolution& iota) {
  return UnorientedView(std::move(graph), iota);
}

Domain::Domain(GraphPtr graph, std::vector<VertexId> vertices, std::vector<EdgeIndex> removed)
    : graph_(std::move(graph)), vertices_(std::move(vertices)), removed_(std::move(removed)) {
  if (!graph_) throw GraphError("domain without graph");
  std::sort(vertices_.begin(), vertices_.end());
  vertices_.erase(std::unique(vertices_.begin(), vertices_.end()), vertices_.end());
  if (vertices_.empty()) throw GraphError("domain is empty");
  local_.assign(static_cast<std::size_t>(graph_->vertex_count()), -1);
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const VertexId v = vertices_[i];
    if (v < 0 || v >= graph_->vertex_count()) {
      throw GraphError("domain vertex " + std::to_string(v) + " is not in the graph");
    }
    local_[static_cast<std::size_t>(v)] = static_cast<int>(i);
  }
  std::sort(removed_.begin(), removed_.end());
  removed_.erase(std::unique(removed_.begin(), removed_.end()), removed_.end());
  removed_mask_.assign(static_cast<std::size_t>(graph_->edge_count()), false);
  for (EdgeIndex e : removed_) {
    if (e < 0 || e >= graph_->edge_count()) {
      throw GraphError("removed edge index " + std::to_string(e) + " is out of range");
    }
    removed_mask_[static_cast<std::size_t>(e)] = true;
  }
}

Domain Domain::whole(GraphPtr graph) {
  std::vector<VertexId> all(static_cast<std::size_t>(graph->vertex_count()));
  for (VertexId v = 0; v < graph->vertex_count(); ++v) all[static_cast<std::size_t>(v)] = v;
  return Domain(std::move(graph), std::move(all));
}

std::vector<EdgeIndex> Domain::usable_edges() const {
  std::vector<EdgeIndex> out;
  for (VertexId v : vertices_) {
    for (EdgeIndex e : graph_->out_edges(v)) {
      if (edge_usable(e)) out.push_back(e);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Domain Domain::without(std::span<const VertexId> vertices) const {
  std::vector<VertexId> kept;
  for (VertexId v : vertices_) {
    if (std::find(vertices.begin(), vertices.end(), v) == vertices.end()) kept.push_back(v);
  }
  return Domain(graph_, std::move(kept), removed_);
}

Domain Domain::with_removed(std::span<const EdgeIndex> edges) const {
  std::vector<EdgeIndex> removed = removed_;
  const ReversalInvolution* iota = graph_->involution();
  for (EdgeIndex e : edges) {
    removed.push_back(e);
    if (iota) removed.push_back((*iota)(e));
  }
  return Domain(graph_, vertices_, std::move(removed));
}

}  // namespace loopsoup
