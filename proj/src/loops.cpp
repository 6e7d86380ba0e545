#include "loopsoup/loops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "loopsoup/green.hpp"

namespace loopsoup {

bool is_loop(const OrientedMultigraph& graph, const EdgePath& path) {
  if (path.empty()) return false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const EdgeIndex e = path[i];
    if (e < 0 || e >= graph.edge_count()) return false;
    const EdgeIndex next = path[(i + 1) % path.size()];
    if (next < 0 || next >= graph.edge_count()) return false;
    if (graph.head(e) != graph.tail(next)) return false;
  }
  return true;
}

bool is_loop_in(const Domain& domain, const EdgePath& path) {
  if (!is_loop(domain.graph(), path)) return false;
  return std::all_of(path.begin(), path.end(), [&](EdgeIndex e) { return domain.edge_usable(e); });
}

void require_loop(const OrientedMultigraph& graph, const EdgePath& path) {
  if (!is_loop(graph, path)) throw std::invalid_argument("edge sequence is not a loop");
}

EdgePath rotate(const EdgePath& path, std::size_t k) {
  EdgePath out(path.size());
  if (path.empty()) return out;
  k %= path.size();
  std::rotate_copy(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(k), path.end(), out.begin());
  return out;
}

EdgePath reverse_path(const EdgePath& path, const ReversalInvolution& iota) {
  EdgePath out;
  out.reserve(path.size());
  for (auto it = path.rbegin(); it != path.rend(); ++it) out.push_back(iota(*it));
  return out;
}

std::size_t least_rotation(const EdgePath& s) {
  // Loops are short, so a direct comparison of rotations is enough.
  const std::size_t n = s.size();
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const EdgeIndex a = s[(k + i) % n];
      const EdgeIndex b = s[(best + i) % n];
      if (a != b) {
        if (a < b) best = k;
        break;
      }
    }
  }
  return best;
}

EdgePath minimal_rotation(const EdgePath& path) { return rotate(path, least_rotation(path)); }

int repetition_count(const EdgePath& path) {
  const std::size_t n = path.size();
  if (n == 0) return 0;
  for (std::size_t period = 1; period <= n; ++period) {
    if (n % period != 0) continue;
    bool ok = true;
    for (std::size_t i = period; i < n && ok; ++i) ok = path[i] == path[i - period];
    if (ok) return static_cast<int>(n / period);
  }
  return 1;
}

Rational rho_mass(const EdgePath& loop, int g) {
  Rational out = inverse_power(static_cast<unsigned>(g), static_cast<unsigned>(loop.size()));
  out /= static_cast<long>(loop.size());
  return out;
}

EdgePath oriented_key(const EdgePath& loop) { return minimal_rotation(loop); }

EdgePath unoriented_key(const EdgePath& loop, const ReversalInvolution& iota) {
  return std::min(minimal_rotation(loop), minimal_rotation(reverse_path(loop, iota)));
}

LoopClass canonicalize_oriented(const OrientedMultigraph& graph, const EdgePath& loop) {
  require_loop(graph, loop);
  LoopClass c;
  c.canonical = minimal_rotation(loop);
  c.J = repetition_count(c.canonical);
  c.mu = inverse_power(static_cast<unsigned>(graph.g()), static_cast<unsigned>(loop.size()));
  c.mu /= c.J;
  return c;
}

UnorientedLoopClass canonicalize_unoriented(const OrientedMultigraph& graph, const EdgePath& loop,
                                            const ReversalInvolution& iota) {
  require_loop(graph, loop);
  validate_involution(graph, iota);
  const EdgePath forward = minimal_rotation(loop);
  const EdgePath backward = minimal_rotation(reverse_path(loop, iota));
  UnorientedLoopClass c;
  c.canonical = std::min(forward, backward);
  c.J = repetition_count(forward);
  c.self_reverse = forward == backward;
  c.J_tilde = c.self_reverse ? 2 * c.J : c.J;
  c.nu = inverse_power(static_cast<unsigned>(graph.g()), static_cast<unsigned>(loop.size()));
  c.nu /= c.J_tilde;
  return c;
}

std::optional<std::size_t> LoopCatalog::find(const EdgePath& key) const {
  auto it = index.find(key);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

Rational LoopCatalog::total_mass() const {
  Rational sum = 0;
  for (const auto& c : classes) sum += c.mass;
  return sum;
}

double LoopCatalog::total_mass_d() const {
  double sum = 0;
  for (const auto& c : classes) sum += c.mass_d;
  return sum;
}

std::size_t default_class_budget() {
  if (const char* env = std::getenv("LOOPSOUP_MAX_CLASSES")) {
    try {
      const auto v = std::stoull(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return 1'000'000;
}

namespace {

// Distances to `target` along usable edges with index >= min_edge.
std::vector<int> distances_to(const Domain& domain, VertexId target, EdgeIndex min_edge) {
  const auto& graph = domain.graph();
  constexpr int kFar = std::numeric_limits<int>::max() / 2;
  std::vector<int> dist(static_cast<std::size_t>(graph.vertex_count()), kFar);
  std::vector<std::vector<EdgeIndex>> in(static_cast<std::size_t>(graph.vertex_count()));
  for (EdgeIndex e = min_edge; e < graph.edge_count(); ++e) {
    if (domain.edge_usable(e)) in[static_cast<std::size_t>(graph.head(e))].push_back(e);
  }
  std::deque<VertexId> queue{target};
  dist[static_cast<std::size_t>(target)] = 0;
  while (!queue.empty()) {
    const VertexId v = queue.front();
    queue.pop_front();
    for (EdgeIndex e : in[static_cast<std::size_t>(v)]) {
      const VertexId u = graph.tail(e);
      if (dist[static_cast<std::size_t>(u)] == kFar) {
        dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(v)] + 1;
        queue.push_back(u);
      }
    }
  }
  return dist;
}

struct Enumerator {
  const Domain& domain;
  int L_max;
  const EnumerationOptions& options;
  std::size_t budget;
  std::vector<EdgePath> found;
  EdgePath path;
  std::vector<int> dist;
  VertexId start = 0;
  EdgeIndex first = 0;

  void extend(VertexId at) {
    const auto& graph = domain.graph();
    for (EdgeIndex e : graph.out_edges(at)) {
      if (e < first || !domain.edge_usable(e)) continue;
      const VertexId next = graph.head(e);
      const int remaining = L_max - static_cast<int>(path.size()) - 1;
      if (dist[static_cast<std::size_t>(next)] > remaining) continue;
      path.push_back(e);
      if (!options.prune || options.prune(path)) {
        if (next == start && least_rotation(path) == 0) {
          if (!options.accept || options.accept(path)) {
            found.push_back(path);
            if (found.size() > budget) {
              throw BudgetExceeded("loop enumeration exceeded the budget of " +
                                   std::to_string(budget) + " classes");
            }
          }
        }
        if (remaining > 0) extend(next);
      }
      path.pop_back();
    }
  }
};

}  // namespace

LoopCatalog enumerate_loops(const Domain& domain, int L_max, Orientation orientation,
                            const EnumerationOptions& options) {
  if (L_max < 0) throw std::invalid_argument("L_max must be nonnegative");
  const auto& graph = domain.graph();
  const int g = graph.g();
  const ReversalInvolution* iota = nullptr;
  if (orientation == Orientation::Unoriented) iota = &graph.require_involution();

  Enumerator en{domain, L_max, options,
                options.max_classes ? options.max_classes : default_class_budget(),
                {}, {}, {}, 0, 0};
  for (EdgeIndex e0 : domain.usable_edges()) {
    if (L_max == 0) break;
    en.first = e0;
    en.start = graph.tail(e0);
    en.dist = distances_to(domain, en.start, e0);
    const VertexId next = graph.head(e0);
    if (en.dist[static_cast<std::size_t>(next)] > L_max - 1) continue;
    en.path = {e0};
    if (!options.prune || options.prune(en.path)) {
      if (next == en.start && (!options.accept || options.accept(en.path))) {
        en.found.push_back(en.path);
        if (en.found.size() > en.budget) {
          throw BudgetExceeded("loop enumeration exceeded the budget of " +
                               std::to_string(en.budget) + " classes");
        }
      }
      if (L_max > 1) en.extend(next);
    }
  }

  LoopCatalog cat{domain, L_max, orientation, {}, 0.0, {}};
  for (auto& loop : en.found) {
    CatalogEntry entry;
    const int J = repetition_count(loop);
    if (orientation == Orientation::Oriented) {
      entry.multiplicity = J;
      entry.preimages = {loop};
      entry.canonical = std::move(loop);
    } else {
      const EdgePath back = minimal_rotation(reverse_path(loop, *iota));
      if (back < loop) continue;  // emitted from the other orientation
      entry.multiplicity = back == loop ? 2 * J : J;
      entry.preimages = {loop};
      if (back != loop) entry.preimages.push_back(back);
      entry.canonical = std::move(loop);
    }
    entry.mass = inverse_power(static_cast<unsigned>(g), static_cast<unsigned>(entry.n()));
    entry.mass /= entry.multiplicity;
    entry.mass_d = entry.mass.get_d();
    cat.classes.push_back(std::move(entry));
  }
  std::sort(cat.classes.begin(), cat.classes.end(), [](const CatalogEntry& a, const CatalogEntry& b) {
    return a.n() != b.n() ? a.n() < b.n() : a.canonical < b.canonical;
  });
  for (std::size_t i = 0; i < cat.classes.size(); ++i) cat.index.emplace(cat.classes[i].canonical, i);

  const double lambda = spectral_radius(domain);
  cat.tail_bound = lambda >= 1.0 - kRecurrenceMargin
                       ? std::numeric_limits<double>::infinity()
                       : tail_bound_for(lambda, domain.size(), L_max);
  return cat;
}

double tail_bound_for(double lambda, int domain_size, int L_max) {
  if (lambda <= 0.0) return 0.0;
  double sum = 0.0;
  double power = std::pow(lambda, L_max + 1);
  int n = L_max + 1;
  for (; n < L_max + 100000; ++n) {
    const double term = power / n;
    sum += term;
    if (term < 1e-18 * sum || power < 1e-300) break;
    power *= lambda;
  }
  // Bound the rest of the series by a geometric tail.
  sum += power * lambda / ((n + 1) * (1.0 - lambda));
  return domain_size * sum;
}

double tail_bound(const Domain& domain, int L_max) {
  const double lambda = spectral_radius(domain);
  if (lambda >= 1.0 - kRecurrenceMargin) {
    throw RecurrentDomainError("tail bound needs spectral radius below one");
  }
  return tail_bound_for(lambda, domain.size(), L_max);
}

std::vector<int> edge_ids(const OrientedMultigraph& graph, const EdgePath& path) {
  std::vector<int> ids;
  ids.reserve(path.size());
  for (EdgeIndex e : path) ids.push_back(graph.edge(e).id);
  return ids;
}

void write_catalog_jsonl(std::ostream& out, const LoopCatalog& catalog) {
  const auto& graph = catalog.domain.graph();
  const char* mult = catalog.orientation == Orientation::Oriented ? "J" : "J_tilde";
  for (const auto& c : catalog.classes) {
    nlohmann::ordered_json j;
    j["edges"] = edge_ids(graph, c.canonical);
    j["n"] = c.n();
    j[mult] = c.multiplicity;
    j["mass"] = to_string(c.mass);
    j["mass_float"] = c.mass_d;
    out << j.dump() << "\n";
  }
}

}  // namespace loopsoup
