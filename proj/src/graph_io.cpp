#include "loopsoup/graph_io.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

namespace loopsoup {

namespace {

std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) words.push_back(line.substr(i, j - i));
    i = j;
  }
  return words;
}

int parse_int(std::string_view word, int line, const char* what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), value);
  if (ec != std::errc() || ptr != word.data() + word.size()) {
    throw ParseError(line, std::string("expected integer ") + what + ", got '" + std::string(word) + "'");
  }
  return value;
}

}  // namespace

OrientedMultigraph parse_graph(std::istream& in) {
  std::optional<int> vertices;
  std::optional<int> degree;
  bool unoriented = false;
  std::vector<EdgeSpec> edges;
  std::vector<int> edge_lines;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text(raw);
    if (auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    const auto words = split_words(text);
    if (words.empty()) continue;
    const auto& key = words[0];
    if (key == "vertices") {
      if (words.size() != 2) throw ParseError(line, "usage: vertices N");
      if (vertices) throw ParseError(line, "duplicate 'vertices'");
      vertices = parse_int(words[1], line, "vertex count");
      if (*vertices <= 0) throw ParseError(line, "vertex count must be positive");
    } else if (key == "degree") {
      if (words.size() != 2) throw ParseError(line, "usage: degree g");
      if (degree) throw ParseError(line, "duplicate 'degree'");
      degree = parse_int(words[1], line, "degree");
      if (*degree <= 0) throw ParseError(line, "degree must be positive");
    } else if (key == "unoriented") {
      if (words.size() != 1) throw ParseError(line, "'unoriented' takes no arguments");
      unoriented = true;
    } else if (key == "edge") {
      if (!vertices) throw ParseError(line, "'edge' before 'vertices'");
      if (words.size() < 4) throw ParseError(line, "usage: edge <id> <tail> <head> [stationary] [rev <id>]");
      EdgeSpec s;
      s.id = parse_int(words[1], line, "edge id");
      s.tail = parse_int(words[2], line, "tail");
      s.head = parse_int(words[3], line, "head");
      for (std::size_t i = 4; i < words.size(); ++i) {
        if (words[i] == "stationary") {
          if (s.stationary) throw ParseError(line, "duplicate 'stationary'");
          s.stationary = true;
        } else if (words[i] == "rev") {
          if (s.rev) throw ParseError(line, "duplicate 'rev'");
          if (i + 1 >= words.size()) throw ParseError(line, "'rev' needs an edge id");
          s.rev = parse_int(words[++i], line, "reverse edge id");
        } else {
          throw ParseError(line, "unknown edge attribute '" + std::string(words[i]) + "'");
        }
      }
      if (s.tail < 0 || s.tail >= *vertices || s.head < 0 || s.head >= *vertices) {
        throw ParseError(line, "edge endpoint outside [0, " + std::to_string(*vertices) + ")");
      }
      for (std::size_t k = 0; k < edges.size(); ++k) {
        if (edges[k].id == s.id) {
          throw ParseError(line, "edge id " + std::to_string(s.id) + " already used on line " +
                                     std::to_string(edge_lines[k]));
        }
      }
      edges.push_back(s);
      edge_lines.push_back(line);
    } else {
      throw ParseError(line, "unknown directive '" + std::string(key) + "'");
    }
  }
  if (!vertices) throw ParseError(line + 1, "missing 'vertices'");
  if (!degree) throw ParseError(line + 1, "missing 'degree'");

  OrientedMultigraph graph = [&] {
    try {
      return build_graph(*vertices, edges, unoriented);
    } catch (const ParseError&) {
      throw;
    } catch (const GraphError& e) {
      throw ParseError(line + 1, e.what());
    }
  }();
  for (VertexId v = 0; v < graph.vertex_count(); ++v) {
    if (graph.out_degree(v) != *degree) {
      throw ParseError(line + 1, "vertex " + std::to_string(v) + " has out-degree " +
                                     std::to_string(graph.out_degree(v)) + ", declared degree is " +
                                     std::to_string(*degree));
    }
  }
  return graph;
}

OrientedMultigraph parse_graph_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_graph(in);
}

OrientedMultigraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open graph file " + path.string());
  return parse_graph(in);
}

std::string format_graph(const OrientedMultigraph& graph) {
  std::ostringstream out;
  out << "vertices " << graph.vertex_count() << "\n";
  out << "degree " << graph.g() << "\n";
  if (graph.involution()) out << "unoriented\n";
  for (const auto& s : graph.specs()) {
    out << "edge " << s.id << ' ' << s.tail << ' ' << s.head;
    if (s.stationary) out << " stationary";
    if (s.rev) out << " rev " << *s.rev;
    out << "\n";
  }
  return out.str();
}

std::vector<std::pair<VertexId, VertexId>> builtin_edges(std::string_view spec, int& vertex_count) {
  const auto colon = spec.find(':');
  const std::string_view kind = spec.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  const auto number = [&](std::string_view w) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size() || v <= 0) {
      throw GraphError("bad size in builtin graph '" + std::string(spec) + "'");
    }
    return v;
  };

  std::vector<std::pair<VertexId, VertexId>> edges;
  if (kind == "single") {
    vertex_count = 1;
  } else if (kind == "cycle") {
    const int n = number(arg);
    if (n < 3) throw GraphError("cycle needs at least 3 vertices");
    vertex_count = n;
    for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  } else if (kind == "path") {
    const int n = number(arg);
    vertex_count = n;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  } else if (kind == "complete") {
    const int n = number(arg);
    vertex_count = n;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    }
  } else if (kind == "grid") {
    const auto x = arg.find('x');
    if (x == std::string_view::npos) throw GraphError("grid spec must look like grid:AxB");
    const int a = number(arg.substr(0, x));
    const int b = number(arg.substr(x + 1));
    vertex_count = a * b;
    for (int r = 0; r < a; ++r) {
      for (int c = 0; c < b; ++c) {
        const int v = r * b + c;
        if (c + 1 < b) edges.emplace_back(v, v + 1);
        if (r + 1 < a) edges.emplace_back(v, v + b);
      }
    }
  } else {
    throw GraphError("unknown builtin graph '" + std::string(spec) + "'");
  }
  return edges;
}

BuiltinGraph make_builtin(std::string_view spec, int degree, int killing) {
  if (killing < 0) throw GraphError("killing must be nonnegative");
  int n = 0;
  const auto simple = builtin_edges(spec, n);
  std::vector<EdgeSpec> specs;
  int next_id = 0;
  const auto add_pair = [&](VertexId a, VertexId b) {
    const int id = next_id;
    next_id += 2;
    specs.push_back(EdgeSpec{id, a, b, false, id + 1});
    specs.push_back(EdgeSpec{id + 1, b, a, false, id});
  };
  for (auto [a, b] : simple) add_pair(a, b);
  const int total = killing > 0 ? 2 * n : n;
  for (VertexId x = 0; killing > 0 && x < n; ++x) {
    for (int k = 0; k < killing; ++k) add_pair(x, n + x);
  }
  auto raw = build_graph(total, std::move(specs), true);
  BuiltinGraph out;
  out.graph = std::make_shared<const OrientedMultigraph>(regularize_degree(raw, degree));
  out.core.resize(static_cast<std::size_t>(n));
  for (VertexId v = 0; v < n; ++v) out.core[static_cast<std::size_t>(v)] = v;
  out.name = std::string(spec);
  return out;
}

}  // namespace loopsoup
