#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "loopsoup/graph.hpp"

namespace loopsoup {

class ParseError : public GraphError {
 public:
  ParseError(int line, const std::string& message)
      : GraphError("line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Text format, one directive per line, `#` starts a comment:
///
///   vertices N
///   degree g
///   unoriented                      (optional; implied by any `rev`)
///   edge <id> <tail> <head> [stationary] [rev <id>]
///
/// On an unoriented graph a self-edge without `rev` is its own reversal and
/// contributes 1 to the degree; a pair of self-edges naming each other with
/// `rev` is one unoriented self-loop contributing 2.
OrientedMultigraph parse_graph(std::istream& in);
OrientedMultigraph parse_graph_string(std::string_view text);
OrientedMultigraph load_graph(const std::filesystem::path& path);
std::string format_graph(const OrientedMultigraph& graph);

/// A graph built from a named shape, plus the vertices that are not cemeteries.
struct BuiltinGraph {
  GraphPtr graph;
  std::vector<VertexId> core;
  std::string name;
};

/// Named shapes: `cycle:n`, `complete:n`, `path:n`, `grid:axb`, `single`.
/// Each core vertex x receives `killing` edges to a private cemetery vertex
/// (and their reversals); every vertex is then padded with stationary ι-fixed
/// self-edges to degree g. Core vertices are numbered first.
BuiltinGraph make_builtin(std::string_view spec, int degree, int killing = 0);

/// Undirected simple edge list for a named shape over `n` returned vertices.
std::vector<std::pair<VertexId, VertexId>> builtin_edges(std::string_view spec, int& vertex_count);

}  // namespace loopsoup
