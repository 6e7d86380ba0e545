#include "loopsoup/bridges.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>
#include <stdexcept>

namespace loopsoup {

bool is_bridge_in(const Domain& domain, const Bridge& b) {
  if (!domain.contains(b.from) || !domain.contains(b.to)) return false;
  if (b.path.empty()) return b.from == b.to;
  const auto& g = domain.graph();
  VertexId at = b.from;
  for (EdgeIndex e : b.path) {
    if (e < 0 || e >= g.edge_count() || g.tail(e) != at || !domain.edge_usable(e)) return false;
    at = g.head(e);
  }
  return at == b.to;
}

namespace {

template <class Scalar>
Scalar probability(const Domain& domain, const GreenMatrix& green, const Bridge& b) {
  if (!domain.contains(b.from) || !domain.contains(b.to)) return Scalar(0);
  const Scalar G = green.at<Scalar>(b.from, b.to);
  if (G == 0) throw std::invalid_argument("bridge endpoint is unreachable");
  if (!is_bridge_in(domain, b)) return Scalar(0);
  if constexpr (std::is_same_v<Scalar, Rational>) {
    return Rational(inverse_power(domain.g(), b.length()) / G);
  } else {
    return std::pow(static_cast<double>(domain.g()), -b.length()) / G;
  }
}

// Steps needed to reach y from each vertex, inside the domain.
std::vector<int> distance_to(const Domain& domain, VertexId y) {
  const auto& g = domain.graph();
  std::vector<int> dist(static_cast<std::size_t>(g.vertex_count()), -1);
  std::vector<std::vector<VertexId>> incoming(static_cast<std::size_t>(g.vertex_count()));
  for (EdgeIndex e : domain.usable_edges()) incoming[static_cast<std::size_t>(g.head(e))].push_back(g.tail(e));
  std::deque<VertexId> queue{y};
  dist[static_cast<std::size_t>(y)] = 0;
  while (!queue.empty()) {
    const VertexId v = queue.front();
    queue.pop_front();
    for (VertexId u : incoming[static_cast<std::size_t>(v)]) {
      if (dist[static_cast<std::size_t>(u)] < 0) {
        dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(v)] + 1;
        queue.push_back(u);
      }
    }
  }
  return dist;
}

}  // namespace

double bridge_probability(const Domain& domain, const GreenMatrix& green, const Bridge& bridge) {
  return probability<double>(domain, green, bridge);
}

Rational bridge_probability_exact(const Domain& domain, const GreenMatrix& green, const Bridge& bridge) {
  return probability<Rational>(domain, green, bridge);
}

std::vector<Bridge> enumerate_bridges(const Domain& domain, VertexId x, VertexId y, int max_length) {
  std::vector<Bridge> out;
  if (!domain.contains(x) || !domain.contains(y)) return out;
  const auto dist = distance_to(domain, y);
  const auto& g = domain.graph();
  EdgePath path;
  const auto extend = [&](auto&& self, VertexId at) -> void {
    if (at == y) out.push_back({x, y, path});
    if (static_cast<int>(path.size()) == max_length) return;
    for (EdgeIndex e : g.out_edges(at)) {
      if (!domain.edge_usable(e)) continue;
      const int d = dist[static_cast<std::size_t>(g.head(e))];
      if (d < 0 || static_cast<int>(path.size()) + 1 + d > max_length) continue;
      path.push_back(e);
      self(self, g.head(e));
      path.pop_back();
    }
  };
  extend(extend, x);
  std::stable_sort(out.begin(), out.end(),
                   [](const Bridge& a, const Bridge& b) { return a.length() < b.length(); });
  return out;
}

Bridge reverse_bridge(const Bridge& bridge, const ReversalInvolution& iota) {
  return {bridge.to, bridge.from, reverse_path(bridge.path, iota)};
}

BridgeSampler::BridgeSampler(Domain domain)
    : domain_(std::make_shared<const Domain>(std::move(domain))), green_(green_function(*domain_)) {}

BridgeSampler::BridgeSampler(Domain domain, GreenMatrix green)
    : domain_(std::make_shared<const Domain>(std::move(domain))), green_(std::move(green)) {}

Bridge BridgeSampler::sample(VertexId x, VertexId y, Rng& rng) const {
  if (!domain_->contains(x) || !domain_->contains(y) || green_(x, y) <= 0) {
    throw std::invalid_argument("bridge endpoint is unreachable");
  }
  const auto& g = domain_->graph();
  const double inv_g = 1.0 / g.g();
  Bridge b{x, y, {}};
  VertexId at = x;
  std::vector<double> weights;
  std::vector<EdgeIndex> choices;
  for (;;) {
    weights.clear();
    choices.clear();
    double total = at == y ? 1.0 : 0.0;
    for (EdgeIndex e : g.out_edges(at)) {
      if (!domain_->edge_usable(e)) continue;
      const double w = inv_g * green_(g.head(e), y);
      if (w <= 0) continue;
      weights.push_back(w);
      choices.push_back(e);
      total += w;
    }
    double u = rng.uniform() * total;
    if (at == y) {
      if (u < 1.0) return b;
      u -= 1.0;
    }
    std::size_t k = 0;
    while (k + 1 < weights.size() && u >= weights[k]) u -= weights[k++];
    const EdgeIndex e = choices[k];
    b.path.push_back(e);
    at = g.head(e);
  }
}

std::vector<std::vector<int>> all_permutations(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::vector<std::vector<std::pair<int, int>>> all_pairings(int m) {
  if (m % 2 != 0) throw std::invalid_argument("pairing needs an even number of points");
  std::vector<std::vector<std::pair<int, int>>> out;
  std::vector<std::pair<int, int>> current;
  std::vector<bool> used(static_cast<std::size_t>(m), false);
  const auto build = [&](auto&& self) -> void {
    int first = 0;
    while (first < m && used[static_cast<std::size_t>(first)]) ++first;
    if (first == m) {
      out.push_back(current);
      return;
    }
    used[static_cast<std::size_t>(first)] = true;
    for (int j = first + 1; j < m; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      used[static_cast<std::size_t>(j)] = true;
      current.emplace_back(first, j);
      self(self);
      current.pop_back();
      used[static_cast<std::size_t>(j)] = false;
    }
    used[static_cast<std::size_t>(first)] = false;
  };
  build(build);
  return out;
}

namespace {

std::size_t pick(const std::vector<double>& weights, Rng& rng, const char* what) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0)) throw std::invalid_argument(std::string("no ") + what + " has positive weight");
  double u = rng.uniform() * total;
  std::size_t k = 0;
  while (k + 1 < weights.size() && u >= weights[k]) u -= weights[k++];
  while (weights[k] == 0) --k;  // u landed on the rounding slack at the end
  return k;
}

}  // namespace

UnorderedBridgeFamily sample_unordered_bridge(const BridgeSampler& sampler, const std::vector<VertexId>& X,
                                              const std::vector<VertexId>& Y, Rng& rng) {
  if (X.size() != Y.size()) throw std::invalid_argument("X and Y differ in length");
  if (static_cast<int>(X.size()) > kMaxPermutationSize) throw BudgetExceeded("too many bridges to permute");
  const auto perms = all_permutations(static_cast<int>(X.size()));
  std::vector<double> w;
  w.reserve(perms.size());
  for (const auto& s : perms) w.push_back(permutation_weight<double>(sampler.green(), X, Y, s));
  UnorderedBridgeFamily f;
  f.permutation = perms[pick(w, rng, "permutation")];
  for (std::size_t j = 0; j < X.size(); ++j) {
    f.bridges.push_back(sampler.sample(X[j], Y[static_cast<std::size_t>(f.permutation[j])], rng));
  }
  return f;
}

ZBridgeFamily sample_z_bridge(const BridgeSampler& sampler, const std::vector<VertexId>& Z, Rng& rng) {
  if (static_cast<int>(Z.size()) > kMaxPairingPoints) throw BudgetExceeded("too many points to pair");
  const auto pairings = all_pairings(static_cast<int>(Z.size()));
  std::vector<double> w;
  w.reserve(pairings.size());
  for (const auto& t : pairings) w.push_back(pairing_weight<double>(sampler.green(), Z, t));
  ZBridgeFamily f;
  f.pairing = pairings[pick(w, rng, "pairing")];
  for (const auto& [a, b] : f.pairing) {
    f.bridges.push_back(sampler.sample(Z[static_cast<std::size_t>(a)], Z[static_cast<std::size_t>(b)], rng));
  }
  return f;
}

std::vector<std::vector<double>> bridge_holding_times(const std::vector<Bridge>& bridges, int g, Rng& rng) {
  std::exponential_distribution<double> hold(g);
  std::vector<std::vector<double>> out;
  out.reserve(bridges.size());
  for (const auto& b : bridges) {
    std::vector<double> times;
    for (int i = 1; i < b.length(); ++i) times.push_back(hold(rng));
    out.push_back(std::move(times));
  }
  return out;
}

nlohmann::ordered_json to_json(const Bridge& bridge, const OrientedMultigraph& graph) {
  nlohmann::ordered_json j;
  j["from"] = bridge.from;
  j["to"] = bridge.to;
  j["edges"] = edge_ids(graph, bridge.path);
  return j;
}

namespace {

nlohmann::ordered_json bridges_json(const std::vector<Bridge>& bridges, const OrientedMultigraph& graph) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& b : bridges) arr.push_back(to_json(b, graph));
  return arr;
}

}  // namespace

nlohmann::ordered_json to_json(const UnorderedBridgeFamily& family, const OrientedMultigraph& graph) {
  nlohmann::ordered_json j;
  j["permutation"] = family.permutation;
  j["bridges"] = bridges_json(family.bridges, graph);
  return j;
}

nlohmann::ordered_json to_json(const ZBridgeFamily& family, const OrientedMultigraph& graph) {
  nlohmann::ordered_json j;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& [a, b] : family.pairing) pairs.push_back({a, b});
  j["pairing"] = pairs;
  j["bridges"] = bridges_json(family.bridges, graph);
  return j;
}

void add_durations(nlohmann::ordered_json& dump, const std::vector<std::vector<double>>& durations) {
  dump["durations"] = durations;
}

}  // namespace loopsoup
