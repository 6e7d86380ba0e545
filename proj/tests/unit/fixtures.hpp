#pragma once

#include <memory>
#include <vector>

#include "loopsoup/graph.hpp"
#include "loopsoup/graph_io.hpp"

namespace loopsoup::testing {

inline GraphPtr share(OrientedMultigraph g) {
  return std::make_shared<const OrientedMultigraph>(std::move(g));
}

// Unoriented simple graph: each pair (a, b) becomes edges a->b and b->a.
inline OrientedMultigraph undirected(int n, const std::vector<std::pair<int, int>>& pairs) {
  std::vector<EdgeSpec> specs;
  int id = 0;
  for (auto [a, b] : pairs) {
    specs.push_back({id, a, b, false, id + 1});
    specs.push_back({id + 1, b, a, false, id});
    id += 2;
  }
  return build_graph(n, std::move(specs), true);
}

inline Domain domain_of(const BuiltinGraph& b) { return Domain(b.graph, b.core); }

}  // namespace loopsoup::testing
