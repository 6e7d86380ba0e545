#include <algorithm>
#include <cmath>
#include <optional>

#include "loopsoup/stats.hpp"
#include "verify_internal.hpp"

namespace loopsoup {

using namespace detail;

namespace {

using SoupLaw = std::map<Configuration, Rational>;
using Set = std::vector<VertexId>;

const ReversalInvolution* iota_for(const Domain& d, Orientation o) {
  return o == Orientation::Unoriented ? &d.graph().require_involution() : nullptr;
}

LoopSoup as_soup(const std::shared_ptr<const Domain>& d, Orientation o, const Configuration& config) {
  return LoopSoup{d, o, 0.0, 0, config};
}

std::vector<std::size_t> classes_where(const LoopCatalog& catalog, const std::function<bool(const EdgePath&)>& keep) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < catalog.classes.size(); ++i) {
    if (keep(catalog.classes[i].canonical)) out.push_back(i);
  }
  return out;
}

template <class Key>
std::map<Key, Rational> normalized(std::map<Key, Rational> law) {
  Rational t = 0;
  for (const auto& [k, p] : law) t += p;
  if (t == 0) return law;
  for (auto& [k, p] : law) p /= t;
  return law;
}

std::string bridges_key(const std::vector<Bridge>& bridges) {
  std::string s;
  for (const auto& b : bridges) {
    s += std::to_string(b.from) + '>' + std::to_string(b.to) + ':' + path_key(b.path) + '|';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Excursions away from F2 (Props 1 and 2).

struct EtaGroup {
  std::vector<Excursion> eta;
  std::vector<VertexId> X, Y, Z;
  SoupLaw law;
};

std::map<std::vector<Excursion>, EtaGroup> soup_side_by_eta(const std::shared_ptr<const Domain>& d, std::span<const VertexId> F1,
                                                            std::span<const VertexId> F2, Orientation o,
                                                            const Rational& intensity, int L_max, int max_pieces) {
  const auto catalog = enumerate_loops(*d, L_max, o);
  const auto& g = d->graph();
  const auto touching = classes_where(catalog, [&](const EdgePath& l) { return visits(g, l, F1) && visits(g, l, F2); });
  std::map<std::vector<Excursion>, EtaGroup> groups;
  for_each_configuration(catalog, intensity, L_max, max_pieces, touching, [&](const Configuration& c, const Rational& w) {
    const auto dec = decompose(as_soup(d, o, c), F1, F2);
    if (dec.N() > max_pieces) return;
    auto& grp = groups[dec.eta];
    if (grp.law.empty()) {
      grp.eta = dec.eta;
      grp.X = dec.X;
      grp.Y = dec.Y;
      grp.Z = dec.Z;
    }
    grp.law[c] += w;
  });
  return groups;
}

DiscreteDistribution eta_bridge_law(const Domain& d1, const GreenMatrix& green1, const std::vector<Excursion>& eta,
                                    int cap, Orientation o) {
  const auto& g = d1.graph();
  DiscreteDistribution out;
  if (o == Orientation::Oriented) {
    std::vector<VertexId> X, Y;
    for (const auto& e : eta) {
      X.push_back(e.to);
      Y.push_back(e.from);
    }
    const auto fl = permutation_families(d1, green1, X, Y, cap);
    if (fl.normalizer == 0) throw std::invalid_argument("excursions cannot be closed in D \\ F1");
    for (const auto& [f, w] : fl.items) out.probabilities[reassemble(g, eta, f)] += w / fl.normalizer;
    out.truncation_mass = fl.truncation_mass();
  } else {
    std::vector<VertexId> Z;
    for (const auto& e : eta) {
      Z.push_back(e.from);
      Z.push_back(e.to);
    }
    const auto fl = pairing_families(d1, green1, Z, cap);
    if (fl.normalizer == 0) throw std::invalid_argument("excursions cannot be closed in D \\ F1");
    for (const auto& [f, w] : fl.items) out.probabilities[reassemble(g, eta, f)] += w / fl.normalizer;
    out.truncation_mass = fl.truncation_mass();
  }
  return out;
}

struct ExactComparison {
  Rational max_tv = 0;
  double max_remainder = 0.0;
  int groups = 0;
  nlohmann::ordered_json worst = nlohmann::ordered_json::object();
};

void record(ExactComparison& cmp, const Rational& tv, double remainder, nlohmann::ordered_json info) {
  ++cmp.groups;
  cmp.max_remainder = std::max(cmp.max_remainder, remainder);
  if (cmp.groups == 1 || tv > cmp.max_tv) {
    cmp.max_tv = tv;
    cmp.worst = std::move(info);
  }
}

TestReport exact_report(std::string prop, const ExactComparison& cmp, const VerifyParams& params, bool control) {
  auto r = make_report(std::move(prop), VerifyMode::Exact, "tv", params);
  r.statistic = to_double(cmp.max_tv);
  r.tolerance = params.tolerance;
  r.tail_bound = cmp.max_remainder;
  r.positive_control = control;
  r.details["conditioning_values"] = cmp.groups;
  r.details["tv_exact_zero"] = cmp.max_tv == 0;
  r.details["worst"] = cmp.worst;
  if (control) r.details["tv_over_threshold"] = r.statistic / params.tolerance;
  if (cmp.groups == 0) r.details["note"] = "no conditioning value within the budget";
  r.decide();
  if (cmp.groups == 0) r.pass = false;
  return r;
}

ExactComparison compare_eta_groups(const std::shared_ptr<const Domain>& d, std::span<const VertexId> F1,
                                   std::span<const VertexId> F2, Orientation o, const Rational& intensity,
                                   const VerifyParams& params) {
  const auto groups = soup_side_by_eta(d, F1, F2, o, intensity, params.L_max, params.max_pieces);
  const Domain d1 = d->without(F1);
  const auto green1 = green_for(d1);
  ExactComparison cmp;
  for (const auto& [eta, grp] : groups) {
    const int cap = params.L_max - total_length(eta);
    const auto bridge = eta_bridge_law(d1, green1, eta, cap, o);
    const auto tv = total_variation_exact(normalized(grp.law), normalized(bridge.probabilities));
    record(cmp, tv, to_double(bridge.truncation_mass),
           {{"N", eta.size()}, {"configurations", grp.law.size()}, {"tv", to_double(tv)},
            {"remainder", to_double(bridge.truncation_mass)}});
  }
  return cmp;
}

// Conditional law of the label-free bridge multiset, keeping configurations
// whose bridges have total length <= cap.
std::map<std::vector<Bridge>, Rational> arc_law(const std::shared_ptr<const Domain>& d, const EtaGroup& grp,
                                                std::span<const VertexId> F1, std::span<const VertexId> F2,
                                                Orientation o, int cap) {
  const auto* iota = iota_for(*d, o);
  std::map<std::vector<Bridge>, Rational> law;
  for (const auto& [c, w] : grp.law) {
    const auto dec = decompose(as_soup(d, o, c), F1, F2);
    const auto& bridges = o == Orientation::Oriented ? dec.beta_truth.bridges : dec.z_beta_truth.bridges;
    if (total_length(bridges) > cap) continue;
    law[arc_key(bridges, iota)] += w;
  }
  return normalized(std::move(law));
}

// Distinct excursion families with the same endpoints must give the same
// conditional bridge law.
TestReport endpoints_only_report(std::string prop, const std::shared_ptr<const Domain>& d, std::span<const VertexId> F1,
                                 std::span<const VertexId> F2, Orientation o, const VerifyParams& params) {
  const auto groups = soup_side_by_eta(d, F1, F2, o, Rational(params.intensity), params.L_max, params.max_pieces);
  std::map<std::vector<VertexId>, std::vector<const EtaGroup*>> by_endpoints;
  for (const auto& [eta, grp] : groups) {
    std::vector<VertexId> key = grp.Z;
    if (o == Orientation::Oriented) {
      key = grp.X;
      key.push_back(-1);
      key.insert(key.end(), grp.Y.begin(), grp.Y.end());
    }
    by_endpoints[key].push_back(&grp);
  }
  ExactComparison cmp;
  int compared = 0;
  for (const auto& [key, list] : by_endpoints) {
    for (std::size_t i = 1; i < list.size(); ++i) {
      const int cap = params.L_max - std::max(total_length(list[0]->eta), total_length(list[i]->eta));
      const auto a = arc_law(d, *list[0], F1, F2, o, cap);
      const auto b = arc_law(d, *list[i], F1, F2, o, cap);
      if (a.empty() || b.empty()) continue;
      ++compared;
      record(cmp, total_variation_exact(a, b), 0.0, {{"N", list[0]->eta.size()}, {"cap", cap}});
    }
  }
  auto r = exact_report(std::move(prop), cmp, params, false);
  r.details["pairs_compared"] = compared;
  return r;
}

// ---------------------------------------------------------------------------
// Monte Carlo binning shared by Props 1, 2 and 5.

struct Bin {
  long total = 0;
  Configuration example;  // the conditioning value is recomputed from it
  std::map<Configuration, long> counts;
};
using Bins = std::map<std::string, Bin>;

void merge_bins(Bins& into, Bins& from) {
  for (auto& [k, b] : from) {
    auto& t = into[k];
    if (t.total == 0) t.example = b.example;
    t.total += b.total;
    for (const auto& [c, n] : b.counts) t.counts[c] += n;
  }
}

// key_of returns the bin key and the configuration to tally, or nothing.
using Observe = std::function<std::optional<std::pair<std::string, Configuration>>(const LoopSoup&)>;

Bins sample_bins(const Domain& domain, Orientation o, double intensity, const VerifyParams& params,
                 const std::string& stream, const Observe& observe) {
  const ExactSoupSampler sampler(domain, o, intensity);
  const Rng base(params.seed, stream);
  return run_blocks<Bins>(
      params.samples, params.threads,
      [&](long begin, long end, Bins& out) {
        for (long i = begin; i < end; ++i) {
          Rng rng = base.substream(static_cast<std::uint64_t>(i));
          const auto obs = observe(sampler.sample(rng));
          if (!obs) continue;
          auto& b = out[obs->first];
          if (b.total == 0) b.example = obs->second;
          ++b.total;
          ++b.counts[obs->second];
        }
      },
      merge_bins);
}

std::vector<const std::pair<const std::string, Bin>*> busiest(const Bins& bins, const VerifyParams& params) {
  std::vector<const std::pair<const std::string, Bin>*> out;
  for (const auto& entry : bins) {
    if (entry.second.total >= params.min_bin) out.push_back(&entry);
  }
  std::stable_sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->second.total > b->second.total; });
  if (static_cast<int>(out.size()) > params.max_bins) out.resize(static_cast<std::size_t>(params.max_bins));
  return out;
}

// χ² of the tallied configurations against a law with an "other" cell.
double gof_against(const std::map<Configuration, long>& counts, long total, const DiscreteDistribution& law) {
  std::vector<double> observed, expected;
  long matched = 0;
  for (const auto& [c, p] : law.probabilities) {
    const auto it = counts.find(c);
    const long n = it == counts.end() ? 0 : it->second;
    matched += n;
    observed.push_back(static_cast<double>(n));
    expected.push_back(to_double(p) * static_cast<double>(total));
  }
  observed.push_back(static_cast<double>(total - matched));
  expected.push_back(std::max(0.0, 1.0 - to_double(law.total())) * static_cast<double>(total));
  return chi_square_gof(observed, expected).p_value;
}

TestReport mc_gof_report(std::string prop, const Bins& bins, const VerifyParams& params,
                         const std::function<DiscreteDistribution(const Configuration&)>& law_for) {
  auto r = make_report(std::move(prop), VerifyMode::MonteCarlo, "bonferroni_p", params);
  std::vector<double> p;
  auto tested = nlohmann::ordered_json::array();
  for (const auto* entry : busiest(bins, params)) {
    const auto law = law_for(entry->second.example);
    p.push_back(gof_against(entry->second.counts, entry->second.total, law));
    tested.push_back({{"samples", entry->second.total}, {"p", p.back()}});
  }
  r.statistic = bonferroni(p);
  r.tolerance = params.significance;
  r.higher_is_better = true;
  r.details["bins"] = tested;
  r.details["sparse_bins"] = static_cast<long>(bins.size()) - static_cast<long>(p.size());
  r.decide();
  if (p.empty()) {
    r.details["note"] = "no bin reached the minimum sample count";
  }
  return r;
}

std::vector<TestReport> excursion_prop(const char* name, const Domain& domain, std::span<const VertexId> F1,
                                       std::span<const VertexId> F2, Orientation o, const VerifyParams& params) {
  const auto d = std::make_shared<const Domain>(domain);
  const std::string prop = name;
  std::vector<TestReport> out;
  if (params.mode == VerifyMode::Exact) {
    out.push_back(exact_report(prop, compare_eta_groups(d, F1, F2, o, Rational(params.intensity), params), params, false));
    out.push_back(endpoints_only_report(prop + ".endpoints-only", d, F1, F2, o, params));
    if (params.controls) {
      const double wrong = 2.0;
      out.push_back(exact_report(prop + ".control", compare_eta_groups(d, F1, F2, o, Rational(wrong), params), params, true));
      out.back().details["intensity"] = wrong;
    }
    return out;
  }
  const Set f1(F1.begin(), F1.end()), f2(F2.begin(), F2.end());
  const auto bins = sample_bins(domain, o, params.intensity, params, prop, [&](const LoopSoup& soup) {
    auto dec = decompose(soup, f1, f2);
    std::optional<std::pair<std::string, Configuration>> obs;
    if (dec.N() == 0 || dec.N() > params.max_pieces) return obs;
    obs.emplace(excursions_key(dec.eta), std::move(dec.touching));
    return obs;
  });
  const Domain d1 = domain.without(F1);
  const auto green1 = green_for(d1);
  out.push_back(mc_gof_report(prop, bins, params, [&](const Configuration& example) {
    const auto dec = decompose(as_soup(d, o, example), f1, f2);
    return eta_bridge_law(d1, green1, dec.eta, params.L_max, o);
  }));
  return out;
}

// ---------------------------------------------------------------------------
// Crossings (Props 1bis and 3bis).

struct CrossingObservation {
  std::string key;
  std::vector<std::vector<Bridge>> sides;  // arcs per side, label free
  std::vector<int> lengths;
};

// Oriented: side 0 = outer (D \ F1), side 1 = inner (D \ F2).
// Unoriented: side k = pieces inside set k.
std::optional<CrossingObservation> observe_crossings(const LoopSoup& soup, const std::vector<Set>& sets, int max_pieces) {
  CrossingObservation obs;
  if (soup.orientation == Orientation::Oriented) {
    const auto c = extract_crossings(soup, sets[0], sets[1]);
    if (c.forward.empty() || static_cast<int>(c.forward.size()) > max_pieces) return std::nullopt;
    obs.key = excursions_key(c.forward) + '#' + excursions_key(c.backward);
    for (const auto* f : {&c.outer_truth, &c.inner_truth}) {
      obs.sides.push_back(arc_key(f->bridges, nullptr));
      obs.lengths.push_back(total_length(f->bridges));
    }
  } else {
    const auto c = extract_unoriented_crossings(soup, sets);
    if (c.crossings.empty() || static_cast<int>(c.crossings.size()) > 2 * max_pieces) return std::nullopt;
    obs.key = excursions_key(c.crossings);
    const auto& iota = soup.domain->graph().require_involution();
    for (const auto& f : c.z_truth) {
      obs.sides.push_back(arc_key(f.bridges, &iota));
      obs.lengths.push_back(total_length(f.bridges));
    }
  }
  return obs;
}

Domain side_domain(const Domain& d, const std::vector<Set>& sets, Orientation o, std::size_t side) {
  if (o == Orientation::Oriented) return d.without(sets[side == 0 ? 0 : 1]);
  Set others;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    if (k != side) others.insert(others.end(), sets[k].begin(), sets[k].end());
  }
  return d.without(others);
}

struct CrossingGroup {
  LoopSoup example;
  int crossing_length = 0;
  SoupLaw law;  // all configurations (caps applied later)
};

struct SideFamilies {
  std::vector<std::vector<std::pair<std::vector<Bridge>, Rational>>> arcs;  // per side: arc key, probability
  Rational remainder = 0;
};

// Bridge-side families for each side of a crossing configuration.
template <class Visit>
void bridge_side_crossings(const Domain& d, const std::vector<Set>& sets, Orientation o, const LoopSoup& example,
                           int cap, Visit visit, double& remainder) {
  const auto& g = d.graph();
  remainder = 0;
  if (o == Orientation::Oriented) {
    const auto c = extract_crossings(example, sets[0], sets[1]);
    const Domain outer = side_domain(d, sets, o, 0), inner = side_domain(d, sets, o, 1);
    const auto fo = permutation_families(outer, green_for(outer), c.X, c.Y, cap);
    const auto fi = permutation_families(inner, green_for(inner), c.X_inner, c.Y_inner, cap);
    remainder = 1 - to_double((1 - fo.truncation_mass()) * (1 - fi.truncation_mass()));
    for (const auto& [a, wa] : fo.items) {
      for (const auto& [b, wb] : fi.items) {
        visit(reassemble(g, c, a, b), Rational(wa * wb / (fo.normalizer * fi.normalizer)));
      }
    }
    return;
  }
  const auto c = extract_unoriented_crossings(example, sets);
  std::vector<FamilyList<ZBridgeFamily>> lists;
  Rational kept = 1;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const Domain side = side_domain(d, sets, o, k);
    lists.push_back(pairing_families(side, green_for(side), c.Z[k], cap));
    kept *= 1 - lists.back().truncation_mass();
  }
  remainder = 1 - to_double(kept);
  std::vector<ZBridgeFamily> chosen(sets.size());
  const auto pick = [&](auto&& self, std::size_t k, const Rational& w) -> void {
    if (k == sets.size()) {
      visit(reassemble(g, c, chosen), w);
      return;
    }
    for (const auto& [f, wf] : lists[k].items) {
      chosen[k] = f;
      self(self, k + 1, Rational(w * wf / lists[k].normalizer));
    }
  };
  pick(pick, 0, Rational(1));
}

struct CrossingExact {
  ExactComparison law;
  ExactComparison factorization;
};

CrossingExact compare_crossings(const std::shared_ptr<const Domain>& d, const std::vector<Set>& sets, Orientation o,
                                const Rational& intensity, const VerifyParams& params) {
  const auto catalog = enumerate_loops(*d, params.L_max, o);
  const auto& g = d->graph();
  const auto crossing = classes_where(catalog, [&](const EdgePath& l) {
    int hit = 0;
    for (const auto& s : sets) hit += visits(g, l, s) ? 1 : 0;
    return hit >= 2;
  });
  const int max_loops = o == Orientation::Oriented ? params.max_pieces : params.max_pieces;
  std::map<std::string, CrossingGroup> groups;
  for_each_configuration(catalog, intensity, params.L_max, max_loops, crossing, [&](const Configuration& c, const Rational& w) {
    const auto soup = as_soup(d, o, c);
    const auto obs = observe_crossings(soup, sets, params.max_pieces);
    if (!obs) return;
    auto& grp = groups[obs->key];
    if (grp.law.empty()) {
      grp.example = soup;
      int arcs = 0;
      for (int n : obs->lengths) arcs += n;
      int total = 0;
      for (const auto& l : c) total += static_cast<int>(l.size());
      grp.crossing_length = total - arcs;
    }
    grp.law[c] += w;
  });

  CrossingExact out;
  const int sides = o == Orientation::Oriented ? 2 : static_cast<int>(sets.size());
  for (const auto& [key, grp] : groups) {
    const int cap = (params.L_max - grp.crossing_length) / sides;
    SoupLaw restricted;
    std::map<std::vector<std::vector<Bridge>>, Rational> joint;
    for (const auto& [c, w] : grp.law) {
      const auto obs = observe_crossings(as_soup(d, o, c), sets, params.max_pieces);
      if (std::any_of(obs->lengths.begin(), obs->lengths.end(), [&](int n) { return n > cap; })) continue;
      restricted[c] += w;
      joint[obs->sides] += w;
    }
    restricted = normalized(std::move(restricted));
    joint = normalized(std::move(joint));

    SoupLaw bridge;
    double remainder = 0;
    bridge_side_crossings(*d, sets, o, grp.example, cap, [&](const Configuration& c, const Rational& w) { bridge[c] += w; },
                          remainder);
    const auto tv = total_variation_exact(restricted, normalized(std::move(bridge)));
    record(out.law, tv, remainder, {{"crossings", grp.example.loops.size()}, {"tv", to_double(tv)}, {"cap", cap}});

    // Product of the side marginals.
    std::vector<std::map<std::vector<Bridge>, Rational>> marginals(static_cast<std::size_t>(sides));
    for (const auto& [obs, w] : joint) {
      for (int k = 0; k < sides; ++k) marginals[static_cast<std::size_t>(k)][obs[static_cast<std::size_t>(k)]] += w;
    }
    std::map<std::vector<std::vector<Bridge>>, Rational> product;
    std::vector<std::vector<Bridge>> current(static_cast<std::size_t>(sides));
    const auto build = [&](auto&& self, int k, const Rational& w) -> void {
      if (k == sides) {
        product[current] = w;
        return;
      }
      for (const auto& [a, p] : marginals[static_cast<std::size_t>(k)]) {
        current[static_cast<std::size_t>(k)] = a;
        self(self, k + 1, Rational(w * p));
      }
    };
    build(build, 0, Rational(1));
    const auto ftv = total_variation_exact(joint, product);
    record(out.factorization, ftv, remainder, {{"tv", to_double(ftv)}, {"cap", cap}});
  }
  return out;
}

// Loops that do not cross must be exactly the loops of the complements.
TestReport residual_report(const std::string& prop, const Domain& d, const std::vector<Set>& sets, Orientation o,
                           const VerifyParams& params) {
  const auto full = enumerate_loops(d, params.L_max, o);
  const auto& g = d.graph();
  std::map<EdgePath, Rational> residual;
  for (const auto& c : full.classes) {
    int hit = 0;
    for (const auto& s : sets) hit += visits(g, c.canonical, s) ? 1 : 0;
    if (hit < 2) residual[c.canonical] = c.mass;
  }
  std::map<EdgePath, Rational> complements;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    Set others;
    for (std::size_t m = 0; m < sets.size(); ++m) {
      if (m != k) others.insert(others.end(), sets[m].begin(), sets[m].end());
    }
    for (const auto& c : enumerate_loops(d.without(others), params.L_max, o).classes) complements[c.canonical] = c.mass;
  }
  auto r = make_report(prop, VerifyMode::Exact, "tv", params);
  r.statistic = to_double(total_variation_exact(residual, complements));
  r.tolerance = params.tolerance;
  r.details["residual_classes"] = residual.size();
  r.details["complement_classes"] = complements.size();
  r.decide();
  return r;
}

// Monte Carlo: per bin, marginal law of each side and independence.
std::vector<TestReport> crossings_mc(const std::string& prop, const Domain& domain, const std::vector<Set>& sets,
                                     Orientation o, const VerifyParams& params) {
  struct CBin {
    long total = 0;
    Configuration example;
    std::map<std::vector<std::string>, long> joint;
  };
  using CBins = std::map<std::string, CBin>;
  const ExactSoupSampler sampler(domain, o, params.intensity);
  const Rng base(params.seed, prop);
  const auto bins = run_blocks<CBins>(
      params.samples, params.threads,
      [&](long begin, long end, CBins& out) {
        for (long i = begin; i < end; ++i) {
          Rng rng = base.substream(static_cast<std::uint64_t>(i));
          const auto soup = sampler.sample(rng);
          const auto obs = observe_crossings(soup, sets, params.max_pieces);
          if (!obs) continue;
          auto& b = out[obs->key];
          if (b.total == 0) b.example = soup.loops;
          ++b.total;
          std::vector<std::string> sides;
          for (const auto& s : obs->sides) sides.push_back(bridges_key(s));
          ++b.joint[sides];
        }
      },
      [](CBins& into, CBins& from) {
        for (auto& [k, b] : from) {
          auto& t = into[k];
          if (t.total == 0) t.example = b.example;
          t.total += b.total;
          for (const auto& [s, n] : b.joint) t.joint[s] += n;
        }
      });

  std::vector<const std::pair<const std::string, CBin>*> tested;
  for (const auto& e : bins) {
    if (e.second.total >= params.min_bin) tested.push_back(&e);
  }
  std::stable_sort(tested.begin(), tested.end(), [](auto* a, auto* b) { return a->second.total > b->second.total; });
  if (static_cast<int>(tested.size()) > params.max_bins) tested.resize(static_cast<std::size_t>(params.max_bins));

  const auto d = std::make_shared<const Domain>(domain);
  const std::size_t sides = o == Orientation::Oriented ? 2 : sets.size();
  std::vector<double> p_marginal, p_independent;
  for (const auto* entry : tested) {
    const auto& bin = entry->second;
    const auto example = as_soup(d, o, bin.example);
    for (std::size_t k = 0; k < sides; ++k) {
      // Marginal of side k against its bridge law.
      std::map<std::string, long> counts;
      std::map<std::string, std::map<std::string, long>> table;
      for (const auto& [s, n] : bin.joint) {
        counts[s[k]] += n;
        std::string rest;
        for (std::size_t m = 0; m < sides; ++m) {
          if (m != k) rest += s[m] + '#';
        }
        table[s[k]][rest] += n;
      }
      const Domain side = side_domain(domain, sets, o, k);
      const auto green = green_for(side);
      std::map<std::string, double> law;
      if (o == Orientation::Oriented) {
        const auto c = extract_crossings(example, sets[0], sets[1]);
        const auto fl = k == 0 ? permutation_families(side, green, c.X, c.Y, params.L_max)
                               : permutation_families(side, green, c.X_inner, c.Y_inner, params.L_max);
        for (const auto& [f, w] : fl.items) law[bridges_key(arc_key(f.bridges, nullptr))] += to_double(w / fl.normalizer);
      } else {
        const auto c = extract_unoriented_crossings(example, sets);
        const auto fl = pairing_families(side, green, c.Z[k], params.L_max);
        const auto& iota = domain.graph().require_involution();
        for (const auto& [f, w] : fl.items) law[bridges_key(arc_key(f.bridges, &iota))] += to_double(w / fl.normalizer);
      }
      std::vector<double> observed, expected;
      long matched = 0, total = bin.total;
      double mass = 0;
      for (const auto& [key, q] : law) {
        const auto it = counts.find(key);
        const long n = it == counts.end() ? 0 : it->second;
        matched += n;
        mass += q;
        observed.push_back(static_cast<double>(n));
        expected.push_back(q * static_cast<double>(total));
      }
      observed.push_back(static_cast<double>(total - matched));
      expected.push_back(std::max(0.0, 1.0 - mass) * static_cast<double>(total));
      p_marginal.push_back(chi_square_gof(observed, expected).p_value);

      // Independence of side k from the others.
      std::map<std::string, int> columns;
      for (const auto& [row, cols] : table) {
        for (const auto& [col, n] : cols) columns.emplace(col, 0);
      }
      int next = 0;
      for (auto& [col, idx] : columns) idx = next++;
      std::vector<std::vector<double>> t;
      for (const auto& [row, cols] : table) {
        std::vector<double> line(columns.size(), 0.0);
        for (const auto& [col, n] : cols) line[static_cast<std::size_t>(columns[col])] = static_cast<double>(n);
        t.push_back(std::move(line));
      }
      if (t.size() > 1 && columns.size() > 1) p_independent.push_back(chi_square_independence(t).p_value);
      if (o == Orientation::Oriented && k == 1) break;
    }
  }
  std::vector<TestReport> out;
  for (const auto& [suffix, p] : {std::pair{".marginals", &p_marginal}, std::pair{".independence", &p_independent}}) {
    auto r = make_report(prop + suffix, VerifyMode::MonteCarlo, "bonferroni_p", params);
    r.statistic = bonferroni(*p);
    r.tolerance = params.significance;
    r.higher_is_better = true;
    r.details["bins_tested"] = tested.size();
    r.details["tests"] = p->size();
    r.details["sparse_bins"] = bins.size() - tested.size();
    r.decide();
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Removed edges (Prop 5).

std::vector<EdgeIndex> representatives(const Domain& d, std::span<const EdgeIndex> removed) {
  const auto& iota = d.graph().require_involution();
  std::vector<EdgeIndex> reps;
  for (EdgeIndex e : removed) {
    const EdgeIndex r = std::min(e, iota(e));
    if (std::find(reps.begin(), reps.end(), r) == reps.end()) reps.push_back(r);
  }
  return reps;
}

DiscreteDistribution jump_bridge_law(const Domain& dp, const GreenMatrix& green, const std::vector<EdgeIndex>& edges,
                                     const std::vector<int>& counts, int cap) {
  const auto& g = dp.graph();
  std::vector<VertexId> Z;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (int k = 0; k < counts[i]; ++k) {
      Z.push_back(g.tail(edges[i]));
      Z.push_back(g.head(edges[i]));
    }
  }
  const auto fl = pairing_families(dp, green, Z, cap);
  if (fl.normalizer == 0) throw std::invalid_argument("jumps cannot be paired in D'");
  DiscreteDistribution out;
  for (const auto& [f, w] : fl.items) out.probabilities[reassemble_jumps(g, edges, counts, f)] += w / fl.normalizer;
  out.truncation_mass = fl.truncation_mass();
  return out;
}

long double_factorial_pairings(int points) {
  long n = 1;
  for (int k = points - 1; k > 1; k -= 2) n *= k;
  return n;
}

struct JumpExact {
  ExactComparison cmp;
  bool uniform = true;
};

JumpExact compare_jump_groups(const std::shared_ptr<const Domain>& d, std::span<const EdgeIndex> removed,
                              const Rational& intensity, const VerifyParams& params) {
  const auto reps = representatives(*d, removed);
  const auto& g = d->graph();
  const auto& iota = g.require_involution();
  const auto catalog = enumerate_loops(*d, params.L_max, Orientation::Unoriented);
  const auto touching = classes_where(catalog, [&](const EdgePath& l) {
    return std::any_of(l.begin(), l.end(), [&](EdgeIndex e) {
      return std::find(reps.begin(), reps.end(), std::min(e, iota(e))) != reps.end();
    });
  });
  std::map<std::vector<int>, SoupLaw> groups;
  std::vector<EdgeIndex> edges;
  for_each_configuration(catalog, intensity, params.L_max, params.max_pieces, touching,
                         [&](const Configuration& c, const Rational& w) {
                           const auto rec = record_edge_jumps(as_soup(d, Orientation::Unoriented, c), reps);
                           int jumps = 0;
                           for (int n : rec.counts) jumps += n;
                           if (jumps > params.max_pieces) return;
                           edges = rec.edges;
                           groups[rec.counts][c] += w;
                         });
  const Domain dp = d->with_removed(reps);
  const auto green = green_for(dp);
  const bool no_edges = dp.usable_edges().empty();
  JumpExact out;
  for (const auto& [counts, law] : groups) {
    int jumps = 0;
    for (int n : counts) jumps += n;
    const auto bridge = jump_bridge_law(dp, green, edges, counts, params.L_max - jumps);
    const auto tv = total_variation_exact(normalized(law), normalized(bridge.probabilities));
    record(out.cmp, tv, to_double(bridge.truncation_mass),
           {{"counts", counts}, {"configurations", law.size()}, {"tv", to_double(tv)}});
    if (no_edges) {
      // Only same-site pairings survive, each with probability 1 / #pairings.
      std::map<VertexId, int> ends;
      for (std::size_t i = 0; i < edges.size(); ++i) {
        ends[g.tail(edges[i])] += counts[i];
        ends[g.head(edges[i])] += counts[i];
      }
      long pairings = 1;
      for (const auto& [v, n] : ends) pairings *= double_factorial_pairings(n);
      std::vector<VertexId> Z;
      for (std::size_t i = 0; i < edges.size(); ++i) {
        for (int k = 0; k < counts[i]; ++k) {
          Z.push_back(g.tail(edges[i]));
          Z.push_back(g.head(edges[i]));
        }
      }
      const auto fl = pairing_families(dp, green, Z, 0);
      bool ok = fl.normalizer == pairings && static_cast<long>(fl.items.size()) == pairings;
      for (const auto& [f, w] : fl.items) {
        for (const auto& [a, b] : f.pairing) ok = ok && Z[static_cast<std::size_t>(a)] == Z[static_cast<std::size_t>(b)];
      }
      out.uniform = out.uniform && ok;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

DiscreteDistribution exact_conditional_beta(const Domain& domain, std::span<const VertexId> F1,
                                            std::span<const VertexId> F2, const std::vector<Excursion>& eta,
                                            int L_max, Orientation orientation, const Rational& intensity) {
  const auto d = std::make_shared<const Domain>(domain);
  const auto groups = soup_side_by_eta(d, F1, F2, orientation, intensity, L_max, static_cast<int>(eta.size()));
  auto sorted_eta = eta;
  std::sort(sorted_eta.begin(), sorted_eta.end());
  const auto it = groups.find(sorted_eta);
  if (it == groups.end()) throw std::invalid_argument("no soup within the length budget has these excursions");
  DiscreteDistribution out;
  out.probabilities = normalized(it->second.law);
  return out;
}

DiscreteDistribution bridge_side_law(const Domain& domain, std::span<const VertexId> F1,
                                     const std::vector<Excursion>& eta, int max_bridge_length,
                                     Orientation orientation) {
  const Domain d1 = domain.without(F1);
  return eta_bridge_law(d1, green_for(d1), eta, max_bridge_length, orientation);
}

std::vector<TestReport> verify_prop1(const Domain& domain, std::span<const VertexId> F1, std::span<const VertexId> F2,
                                     const VerifyParams& params) {
  return excursion_prop("prop1", domain, F1, F2, Orientation::Oriented, params);
}

std::vector<TestReport> verify_prop2(const Domain& domain, std::span<const VertexId> F1, std::span<const VertexId> F2,
                                     const VerifyParams& params) {
  return excursion_prop("prop2", domain, F1, F2, Orientation::Unoriented, params);
}

std::vector<TestReport> verify_prop1bis_3bis(const Domain& domain, const std::vector<std::vector<VertexId>>& sets,
                                             Orientation orientation, const VerifyParams& params) {
  if (sets.size() < 2) throw std::invalid_argument("at least two marked sets are needed");
  if (orientation == Orientation::Oriented && sets.size() != 2) {
    throw std::invalid_argument("the oriented statement is about two sets");
  }
  const std::string prop = orientation == Orientation::Oriented ? "prop1bis" : "prop3bis";
  if (params.mode == VerifyMode::MonteCarlo) return crossings_mc(prop, domain, sets, orientation, params);
  const auto d = std::make_shared<const Domain>(domain);
  std::vector<TestReport> out;
  const auto main = compare_crossings(d, sets, orientation, Rational(params.intensity), params);
  out.push_back(exact_report(prop, main.law, params, false));
  out.push_back(exact_report(prop + ".factorization", main.factorization, params, false));
  out.push_back(residual_report(prop + ".residual", domain, sets, orientation, params));
  if (params.controls) {
    const auto control = compare_crossings(d, sets, orientation, Rational(2), params);
    out.push_back(exact_report(prop + ".control", control.law, params, true));
    out.back().details["intensity"] = 2.0;
  }
  return out;
}

std::vector<TestReport> verify_prop5(const Domain& domain, std::span<const EdgeIndex> removed,
                                     const VerifyParams& params) {
  const auto d = std::make_shared<const Domain>(domain);
  std::vector<TestReport> out;
  if (params.mode == VerifyMode::Exact) {
    const auto main = compare_jump_groups(d, removed, Rational(params.intensity), params);
    out.push_back(exact_report("prop5", main.cmp, params, false));
    const auto all = domain.usable_edges();
    const auto degenerate = compare_jump_groups(d, all, Rational(params.intensity), params);
    out.push_back(exact_report("prop5.all-removed", degenerate.cmp, params, false));
    out.back().details["uniform_same_site_pairings"] = degenerate.uniform;
    if (!degenerate.uniform) out.back().pass = false;
    if (params.controls) {
      out.push_back(exact_report("prop5.control", compare_jump_groups(d, removed, Rational(2), params).cmp, params, true));
      out.back().details["intensity"] = 2.0;
    }
    return out;
  }
  const auto reps = representatives(domain, removed);
  struct Tally {
    Bins bins;
    std::map<std::pair<int, int>, long> table;  // (jumps, residual loops), capped
  };
  const ExactSoupSampler sampler(domain, Orientation::Unoriented, params.intensity);
  const Rng base(params.seed, "prop5");
  const auto tally = run_blocks<Tally>(
      params.samples, params.threads,
      [&](long begin, long end, Tally& out) {
        for (long i = begin; i < end; ++i) {
          Rng rng = base.substream(static_cast<std::uint64_t>(i));
          auto rec = record_edge_jumps(sampler.sample(rng), reps);
          int jumps = 0;
          for (int n : rec.counts) jumps += n;
          ++out.table[{std::min(jumps, 3), std::min(static_cast<int>(rec.residual.size()), 3)}];
          if (jumps == 0 || jumps > params.max_pieces) continue;
          std::string key;
          for (int n : rec.counts) key += std::to_string(n) + ',';
          auto& b = out.bins[key];
          if (b.total == 0) b.example = rec.touching;
          ++b.total;
          ++b.counts[rec.touching];
        }
      },
      [](Tally& into, Tally& from) {
        merge_bins(into.bins, from.bins);
        for (const auto& [k, n] : from.table) into.table[k] += n;
      });
  const Domain dp = domain.with_removed(reps);
  const auto green = green_for(dp);
  out.push_back(mc_gof_report("prop5", tally.bins, params, [&](const Configuration& example) {
    const auto rec = record_edge_jumps(as_soup(d, Orientation::Unoriented, example), reps);
    return jump_bridge_law(dp, green, rec.edges, rec.counts, params.L_max);
  }));
  std::vector<std::vector<double>> t(4, std::vector<double>(4, 0.0));
  for (const auto& [k, n] : tally.table) t[static_cast<std::size_t>(k.first)][static_cast<std::size_t>(k.second)] = static_cast<double>(n);
  auto r = make_report("prop5.residual-independence", VerifyMode::MonteCarlo, "p_value", params);
  r.statistic = chi_square_independence(t).p_value;
  r.tolerance = params.significance;
  r.higher_is_better = true;
  r.decide();
  out.push_back(std::move(r));
  return out;
}

// ---------------------------------------------------------------------------
// Occupation field.

namespace {

struct FieldLaw {
  std::vector<int> region;  // per coordinate: 0 inside F1, 1 boundary, 2 inside F2
  std::vector<EdgeIndex> coordinate_edge;
  std::map<std::vector<int>, Rational> weights;
};

FieldLaw field_law(const Domain& d, std::span<const VertexId> F1, Orientation o, const Rational& intensity, int L) {
  const auto& g = d.graph();
  const auto catalog = enumerate_loops(d, L, o);
  FieldLaw out;
  std::map<EdgeIndex, int> coordinate;
  const auto* iota = iota_for(d, o);
  for (EdgeIndex e : d.usable_edges()) {
    const EdgeIndex key = iota ? std::min(e, (*iota)(e)) : e;
    if (coordinate.count(key)) continue;
    coordinate[key] = static_cast<int>(out.coordinate_edge.size());
    out.coordinate_edge.push_back(key);
    const bool t1 = std::find(F1.begin(), F1.end(), g.tail(key)) != F1.end();
    const bool h1 = std::find(F1.begin(), F1.end(), g.head(key)) != F1.end();
    out.region.push_back(t1 && h1 ? 0 : (!t1 && !h1 ? 2 : 1));
  }
  const std::size_t dim = out.coordinate_edge.size();
  out.weights[std::vector<int>(dim, 0)] = 1;
  for (const auto& c : catalog.classes) {
    std::vector<int> f(dim, 0);
    for (EdgeIndex e : c.canonical) ++f[static_cast<std::size_t>(coordinate.at(iota ? std::min(e, (*iota)(e)) : e))];
    const Rational m = intensity * c.mass;
    std::map<std::vector<int>, Rational> next;
    for (const auto& [state, w] : out.weights) {
      int used = 0;
      for (int x : state) used += x;
      std::vector<int> s = state;
      Rational term = w;
      for (int k = 0; used + k * c.n() <= L; ++k) {
        if (k > 0) {
          for (std::size_t i = 0; i < dim; ++i) s[i] += f[i];
          term *= m / k;
        }
        next[s] += term;
      }
    }
    out.weights = std::move(next);
  }
  return out;
}

struct MarkovResult {
  double cmi = 0.0;
  bool exact_factorization = true;
  int boundary_values = 0;
};

MarkovResult conditional_mutual_information(const FieldLaw& law, int K1, int Kb, int K2, std::optional<std::size_t> tilt,
                                            const Rational& theta, bool condition_on_boundary = true) {
  using Part = std::vector<int>;
  std::map<Part, std::map<std::pair<Part, Part>, Rational>> slices;
  for (const auto& [state, w] : law.weights) {
    Part a, b, c;
    int na = 0, nb = 0, nc = 0;
    for (std::size_t i = 0; i < state.size(); ++i) {
      switch (law.region[i]) {
        case 0: a.push_back(state[i]); na += state[i]; break;
        case 1: b.push_back(state[i]); nb += state[i]; break;
        default: c.push_back(state[i]); nc += state[i]; break;
      }
    }
    if (na > K1 || nb > Kb || nc > K2) continue;
    Rational weight = w;
    if (tilt) weight *= pow_int(theta, static_cast<unsigned>(state[*tilt]));
    slices[condition_on_boundary ? b : Part{}][{a, c}] += weight;
  }
  MarkovResult out;
  Rational grand = 0;
  for (const auto& [b, cells] : slices) {
    for (const auto& [ac, w] : cells) grand += w;
  }
  for (const auto& [b, cells] : slices) {
    ++out.boundary_values;
    std::map<Part, Rational> pa, pc;
    Rational pb = 0;
    for (const auto& [ac, w] : cells) {
      pa[ac.first] += w;
      pc[ac.second] += w;
      pb += w;
    }
    for (const auto& [a, wa] : pa) {
      for (const auto& [c, wc] : pc) {
        const auto it = cells.find({a, c});
        const Rational joint = it == cells.end() ? Rational(0) : it->second;
        if (joint * pb != wa * wc) out.exact_factorization = false;
        if (joint > 0) {
          const double ratio = to_double(Rational(joint * pb / (wa * wc)));
          out.cmi += to_double(Rational(joint / grand)) * std::log(ratio);
        }
      }
    }
  }
  return out;
}

}  // namespace

std::vector<TestReport> verify_occupation_markov(const Domain& domain, std::span<const VertexId> F1,
                                                 Orientation orientation, const VerifyParams& params) {
  const int L = params.L_max;
  const int Kb = 2;
  const int K1 = (L - Kb) / 2, K2 = L - Kb - K1;
  const std::string prop = orientation == Orientation::Oriented ? "occupation-markov.oriented" : "occupation-markov";
  std::vector<TestReport> out;
  const auto run = [&](std::optional<std::size_t> tilt, std::string name, bool control) {
    const auto law = field_law(domain, F1, orientation, Rational(params.intensity), L);
    if (tilt) {
      // Tilt the first coordinate inside F1 (or the first one, if there is none).
      const auto it = std::find(law.region.begin(), law.region.end(), 0);
      tilt = it == law.region.end() ? 0 : static_cast<std::size_t>(it - law.region.begin());
    }
    const auto res = conditional_mutual_information(law, K1, Kb, K2, tilt, Rational(params.theta), !control);
    auto r = make_report(std::move(name), VerifyMode::Exact, "cmi", params);
    r.statistic = std::max(0.0, res.cmi);
    r.tolerance = 1e-12;
    r.positive_control = control;
    r.details["exact_factorization"] = res.exact_factorization;
    r.details["boundary_values"] = res.boundary_values;
    r.details["caps"] = {K1, Kb, K2};
    r.details["coordinates"] = law.coordinate_edge.size();
    if (tilt) {
      r.details["tilted_edge"] = law.coordinate_edge[*tilt];
      r.details["theta"] = params.theta;
    }
    // The field is Markov at every intensity, so the control drops the
    // boundary from the conditioning instead.
    if (control) r.details["conditioning"] = "none";
    r.decide();
    if (!control && !res.exact_factorization) r.pass = false;
    out.push_back(std::move(r));
  };
  run(std::nullopt, prop, false);
  run(std::size_t{0}, prop + ".tilted", false);
  if (params.controls) run(std::nullopt, prop + ".control", true);
  return out;
}

}  // namespace loopsoup
