#include <algorithm>
#include <numeric>
#include <sstream>

#include "verify_internal.hpp"

namespace loopsoup {

void TestReport::decide() { pass = higher_is_better ? statistic >= tolerance : statistic <= tolerance; }

nlohmann::ordered_json to_json(const TestReport& r) {
  nlohmann::ordered_json j;
  j["prop"] = r.prop;
  j["mode"] = r.mode;
  j["statistic"] = r.statistic;
  j["statistic_name"] = r.statistic_name;
  j["tolerance"] = r.tolerance;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["L_max"] = r.L_max;
  j["tail_bound"] = r.tail_bound;
  j["verdict"] = r.pass ? "pass" : "fail";
  j["positive_control"] = r.positive_control;
  if (!r.details.empty()) j["details"] = r.details;
  return j;
}

Rational DiscreteDistribution::total() const {
  Rational t = 0;
  for (const auto& [k, p] : probabilities) t += p;
  return t;
}

void DiscreteDistribution::normalize() {
  const Rational t = total();
  if (t == 0) throw std::invalid_argument("empty distribution");
  for (auto& [k, p] : probabilities) p /= t;
}

void for_each_configuration(const LoopCatalog& catalog, const Rational& intensity, int max_length, int max_loops,
                            const std::vector<std::size_t>& classes,
                            const std::function<void(const Configuration&, const Rational&)>& visit) {
  std::vector<std::size_t> order;
  for (std::size_t c : classes) {
    if (catalog.classes[c].n() <= max_length) order.push_back(c);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return catalog.classes[a].n() < catalog.classes[b].n(); });
  std::vector<Rational> mass;
  for (std::size_t c : order) mass.push_back(intensity * catalog.classes[c].mass);

  Configuration config;
  std::vector<int> copies(order.size(), 0);
  // Multisets as nondecreasing index sequences; adding one more copy of
  // class i multiplies the weight by m_i / (k_i + 1).
  const auto extend = [&](auto&& self, std::size_t from, int room, int loops_left, const Rational& w) -> void {
    if (!config.empty()) {
      Configuration sorted = config;
      std::sort(sorted.begin(), sorted.end());
      visit(sorted, w);
    }
    if (loops_left == 0) return;
    for (std::size_t i = from; i < order.size(); ++i) {
      const int n = catalog.classes[order[i]].n();
      if (n > room) break;
      ++copies[i];
      config.push_back(catalog.classes[order[i]].canonical);
      self(self, i, room - n, loops_left - 1, Rational(w * mass[i] / copies[i]));
      config.pop_back();
      --copies[i];
    }
  };
  extend(extend, 0, max_length, max_loops, Rational(1));
}

namespace detail {

namespace {

// All choices of one bridge per slot with total length <= cap.
template <class Emit>
void choose_bridges(const std::vector<const std::vector<Bridge>*>& options, int cap, Emit emit) {
  std::vector<Bridge> chosen;
  const auto pick = [&](auto&& self, std::size_t j, int room) -> void {
    if (j == options.size()) {
      emit(chosen, cap - room);
      return;
    }
    for (const Bridge& b : *options[j]) {
      if (b.length() > room) break;  // enumerate_bridges lists shortest first
      chosen.push_back(b);
      self(self, j + 1, room - b.length());
      chosen.pop_back();
    }
  };
  pick(pick, 0, cap);
}

class BridgeCache {
 public:
  BridgeCache(const Domain& d, int cap) : domain_(d), cap_(cap) {}
  const std::vector<Bridge>& get(VertexId x, VertexId y) {
    auto [it, fresh] = cache_.try_emplace({x, y});
    if (fresh) it->second = enumerate_bridges(domain_, x, y, cap_);
    return it->second;
  }

 private:
  const Domain& domain_;
  int cap_;
  std::map<std::pair<VertexId, VertexId>, std::vector<Bridge>> cache_;
};

}  // namespace

FamilyList<UnorderedBridgeFamily> permutation_families(const Domain& domain, const GreenMatrix& green,
                                                       const std::vector<VertexId>& X, const std::vector<VertexId>& Y,
                                                       int cap) {
  if (X.size() != Y.size()) throw std::invalid_argument("X and Y differ in length");
  if (static_cast<int>(X.size()) > kMaxPermutationSize) throw BudgetExceeded("too many bridges to permute");
  FamilyList<UnorderedBridgeFamily> out;
  BridgeCache cache(domain, std::max(cap, 0));
  const unsigned g = static_cast<unsigned>(domain.g());
  for (const auto& s : all_permutations(static_cast<int>(X.size()))) {
    Rational w = 1;
    for (std::size_t j = 0; j < X.size(); ++j) w *= green_entry(green, X[j], Y[static_cast<std::size_t>(s[j])]);
    if (w == 0) continue;
    out.normalizer += w;
    if (cap < 0) continue;
    std::vector<const std::vector<Bridge>*> options;
    for (std::size_t j = 0; j < X.size(); ++j) options.push_back(&cache.get(X[j], Y[static_cast<std::size_t>(s[j])]));
    choose_bridges(options, cap, [&](const std::vector<Bridge>& bridges, int used) {
      out.items.push_back({UnorderedBridgeFamily{s, bridges}, inverse_power(g, static_cast<unsigned>(used))});
    });
  }
  return out;
}

FamilyList<ZBridgeFamily> pairing_families(const Domain& domain, const GreenMatrix& green,
                                           const std::vector<VertexId>& Z, int cap) {
  if (static_cast<int>(Z.size()) > kMaxPairingPoints) throw BudgetExceeded("too many points to pair");
  FamilyList<ZBridgeFamily> out;
  BridgeCache cache(domain, std::max(cap, 0));
  const unsigned g = static_cast<unsigned>(domain.g());
  for (const auto& t : all_pairings(static_cast<int>(Z.size()))) {
    Rational w = 1;
    for (const auto& [a, b] : t) w *= green_entry(green, Z[static_cast<std::size_t>(a)], Z[static_cast<std::size_t>(b)]);
    if (w == 0) continue;
    out.normalizer += w;
    if (cap < 0) continue;
    std::vector<const std::vector<Bridge>*> options;
    for (const auto& [a, b] : t) options.push_back(&cache.get(Z[static_cast<std::size_t>(a)], Z[static_cast<std::size_t>(b)]));
    choose_bridges(options, cap, [&](const std::vector<Bridge>& bridges, int used) {
      out.items.push_back({ZBridgeFamily{t, bridges}, inverse_power(g, static_cast<unsigned>(used))});
    });
  }
  return out;
}

std::vector<Bridge> arc_key(const std::vector<Bridge>& bridges, const ReversalInvolution* iota) {
  std::vector<Bridge> out;
  out.reserve(bridges.size());
  for (const auto& b : bridges) out.push_back(iota ? std::min(b, reverse_bridge(b, *iota)) : b);
  std::sort(out.begin(), out.end());
  return out;
}

int total_length(const std::vector<Bridge>& bridges) {
  int n = 0;
  for (const auto& b : bridges) n += b.length();
  return n;
}

int total_length(const std::vector<Excursion>& pieces) {
  int n = 0;
  for (const auto& e : pieces) n += static_cast<int>(e.path.size());
  return n;
}

std::string path_key(const EdgePath& path) {
  std::string s;
  for (EdgeIndex e : path) {
    s += std::to_string(e);
    s += ',';
  }
  return s;
}

std::string excursions_key(const std::vector<Excursion>& pieces) {
  std::string s;
  for (const auto& e : pieces) {
    s += path_key(e.path);
    s += '|';
  }
  return s;
}

bool visits(const OrientedMultigraph& g, const EdgePath& loop, std::span<const VertexId> set) {
  return std::any_of(loop.begin(), loop.end(), [&](EdgeIndex e) {
    return std::find(set.begin(), set.end(), g.tail(e)) != set.end();
  });
}

TestReport make_report(std::string prop, VerifyMode mode, std::string statistic_name, const VerifyParams& params) {
  TestReport r;
  r.prop = std::move(prop);
  r.mode = mode_name(mode);
  r.statistic_name = std::move(statistic_name);
  r.seed = params.seed;
  r.L_max = params.L_max;
  r.samples = mode == VerifyMode::Exact ? 0 : params.samples;
  return r;
}

}  // namespace detail

}  // namespace loopsoup
