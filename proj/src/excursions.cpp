#include "loopsoup/excursions.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace loopsoup {

namespace {

// A loop split into pieces of interest, in loop order, with the arcs that
// join the end of each piece to the start of the next one.
struct SplitLoop {
  std::vector<EdgePath> pieces;
  std::vector<EdgePath> arcs;  // arcs[k]: end of pieces[k] -> start of pieces[k+1]
};

EdgePath cyclic_slice(const EdgePath& loop, std::size_t start, std::size_t len) {
  EdgePath out;
  out.reserve(len);
  for (std::size_t i = 0; i < len; ++i) out.push_back(loop[(start + i) % loop.size()]);
  return out;
}

// Cuts the loop at the given sorted positions and flags segments. Segment k
// runs from cuts[k] to cuts[k+1] (cyclically).
template <class IsPiece>
SplitLoop split(const EdgePath& loop, const std::vector<std::size_t>& cuts, IsPiece is_piece) {
  SplitLoop out;
  const std::size_t n = loop.size();
  const std::size_t m = cuts.size();
  std::vector<std::pair<EdgePath, bool>> segments;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t start = cuts[k];
    const std::size_t len = m == 1 ? n : (cuts[(k + 1) % m] + n - start - 1) % n + 1;
    EdgePath seg = cyclic_slice(loop, start, len);
    const bool piece = is_piece(seg);
    segments.emplace_back(std::move(seg), piece);
  }
  const auto first = std::find_if(segments.begin(), segments.end(), [](const auto& s) { return s.second; });
  if (first == segments.end()) return out;
  std::rotate(segments.begin(), first, segments.end());
  EdgePath arc;
  for (auto& [seg, piece] : segments) {
    if (piece) {
      if (!out.pieces.empty()) out.arcs.push_back(std::move(arc));
      arc.clear();
      out.pieces.push_back(std::move(seg));
    } else {
      arc.insert(arc.end(), seg.begin(), seg.end());
    }
  }
  out.arcs.push_back(std::move(arc));
  return out;
}

std::vector<std::size_t> visits(const OrientedMultigraph& g, const EdgePath& loop, const std::vector<int>& label) {
  std::vector<std::size_t> cuts;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    if (label[static_cast<std::size_t>(g.tail(loop[i]))] >= 0) cuts.push_back(i);
  }
  return cuts;
}

Excursion make_piece(const OrientedMultigraph& g, EdgePath path) {
  Excursion e;
  e.from = g.tail(path.front());
  e.to = g.head(path.back());
  e.path = std::move(path);
  return e;
}

Excursion reversed(const Excursion& e, const ReversalInvolution& iota) {
  return {reverse_path(e.path, iota), e.to, e.from};
}

// One occurrence of a piece, with where it sits in the soup.
struct Occurrence {
  Excursion canonical;
  bool flipped = false;  // traversed against the canonical direction
  std::size_t loop = 0;
  std::size_t order = 0;
  int index = -1;
};

// Sorts occurrences by (key, loop, order) and writes their rank to index.
template <class Key>
void rank(std::vector<Occurrence>& occ, Key key) {
  std::vector<std::size_t> ids(occ.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = key(occ[a]);
    const auto kb = key(occ[b]);
    if (ka != kb) return ka < kb;
    return std::tie(occ[a].loop, occ[a].order) < std::tie(occ[b].loop, occ[b].order);
  });
  for (std::size_t r = 0; r < ids.size(); ++r) occ[ids[r]].index = static_cast<int>(r);
}

// Closing pieces into loops. Piece i has slots 2i (start) and 2i+1 (end);
// links[s] leads from slot s along a path to another slot.
struct Link {
  int to = -1;
  EdgePath path;
};

std::vector<EdgePath> close_loops(const std::vector<Excursion>& pieces, const std::vector<Link>& links,
                                  const ReversalInvolution* iota) {
  std::vector<bool> used(pieces.size(), false);
  std::vector<EdgePath> loops;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (used[i]) continue;
    EdgePath loop;
    int slot = static_cast<int>(2 * i);
    do {
      const std::size_t p = static_cast<std::size_t>(slot / 2);
      if (used[p]) throw std::invalid_argument("bridges do not close the pieces into loops");
      used[p] = true;
      int exit = 0;
      if (slot % 2 == 0) {
        loop.insert(loop.end(), pieces[p].path.begin(), pieces[p].path.end());
        exit = slot + 1;
      } else {
        if (!iota) throw std::invalid_argument("piece entered backwards in an oriented hook-up");
        const EdgePath back = reverse_path(pieces[p].path, *iota);
        loop.insert(loop.end(), back.begin(), back.end());
        exit = slot - 1;
      }
      const Link& link = links[static_cast<std::size_t>(exit)];
      if (link.to < 0) throw std::invalid_argument("dangling piece end");
      loop.insert(loop.end(), link.path.begin(), link.path.end());
      slot = link.to;
    } while (slot != static_cast<int>(2 * i));
    loops.push_back(iota ? unoriented_key(loop, *iota) : oriented_key(loop));
  }
  std::sort(loops.begin(), loops.end());
  return loops;
}

void require_path(const OrientedMultigraph& g, const Bridge& b) {
  VertexId at = b.from;
  for (EdgeIndex e : b.path) {
    if (g.tail(e) != at) throw std::invalid_argument("bridge path is not connected");
    at = g.head(e);
  }
  if (at != b.to) throw std::invalid_argument("bridge path ends at the wrong vertex");
}

// Oriented hook-up: end of piece j (slot 2j+1) to start of piece σ(j).
void link_oriented(const OrientedMultigraph& g, const std::vector<Excursion>& pieces, std::size_t offset_from,
                   std::size_t offset_to, std::size_t count_to, const UnorderedBridgeFamily& beta,
                   std::vector<Link>& links) {
  if (beta.permutation.size() != beta.bridges.size()) throw std::invalid_argument("malformed bridge family");
  for (std::size_t j = 0; j < beta.permutation.size(); ++j) {
    const std::size_t target = static_cast<std::size_t>(beta.permutation[j]);
    if (target >= count_to) throw std::invalid_argument("permutation out of range");
    const Excursion& from = pieces[offset_from + j];
    const Excursion& to = pieces[offset_to + target];
    const Bridge& b = beta.bridges[j];
    if (b.from != from.to || b.to != to.from) throw std::invalid_argument("bridge endpoints do not match");
    require_path(g, b);
    links[2 * (offset_from + j) + 1] = {static_cast<int>(2 * (offset_to + target)), b.path};
  }
}

// Unoriented hook-up of the slots listed in `slots` (Z index -> global slot).
void link_pairing(const OrientedMultigraph& g, const ReversalInvolution& iota, const std::vector<int>& slots,
                  const std::vector<VertexId>& Z, const ZBridgeFamily& beta, std::vector<Link>& links) {
  if (beta.pairing.size() != beta.bridges.size() || 2 * beta.pairing.size() != Z.size()) {
    throw std::invalid_argument("pairing does not cover the extremities");
  }
  for (std::size_t k = 0; k < beta.pairing.size(); ++k) {
    const auto [a, b] = beta.pairing[k];
    const Bridge& br = beta.bridges[k];
    if (br.from != Z[static_cast<std::size_t>(a)] || br.to != Z[static_cast<std::size_t>(b)]) {
      throw std::invalid_argument("bridge endpoints do not match");
    }
    require_path(g, br);
    const int sa = slots[static_cast<std::size_t>(a)];
    const int sb = slots[static_cast<std::size_t>(b)];
    if (links[static_cast<std::size_t>(sa)].to >= 0 || links[static_cast<std::size_t>(sb)].to >= 0) {
      throw std::invalid_argument("extremity paired twice");
    }
    links[static_cast<std::size_t>(sa)] = {sb, br.path};
    links[static_cast<std::size_t>(sb)] = {sa, reverse_path(br.path, iota)};
  }
}

std::vector<int> labels(const Domain& d, const std::vector<std::vector<VertexId>>& sets) {
  std::vector<int> label(static_cast<std::size_t>(d.graph().vertex_count()), -1);
  for (std::size_t k = 0; k < sets.size(); ++k) {
    if (sets[k].empty()) throw std::invalid_argument("marked sets must be nonempty");
    for (VertexId v : sets[k]) {
      if (!d.contains(v)) throw std::invalid_argument("marked vertex outside the domain");
      auto& l = label[static_cast<std::size_t>(v)];
      if (l >= 0 && l != static_cast<int>(k)) throw std::invalid_argument("marked sets overlap");
      l = static_cast<int>(k);
    }
  }
  return label;
}

const ReversalInvolution* involution_for(const LoopSoup& soup) {
  if (soup.orientation == Orientation::Oriented) return nullptr;
  return &soup.domain->graph().require_involution();
}

// Builds the pairing of Z slots from arcs joining (slot a -> slot b), the
// arc read from a to b.
ZBridgeFamily pairing_from_arcs(const std::vector<std::tuple<int, int, EdgePath>>& arcs,
                                const std::vector<VertexId>& Z, const ReversalInvolution& iota) {
  std::vector<std::pair<std::pair<int, int>, Bridge>> pairs;
  for (const auto& [a, b, path] : arcs) {
    if (a < b) {
      pairs.push_back({{a, b}, Bridge{Z[static_cast<std::size_t>(a)], Z[static_cast<std::size_t>(b)], path}});
    } else {
      pairs.push_back({{b, a},
                       Bridge{Z[static_cast<std::size_t>(b)], Z[static_cast<std::size_t>(a)], reverse_path(path, iota)}});
    }
  }
  std::sort(pairs.begin(), pairs.end());
  ZBridgeFamily f;
  for (auto& [p, b] : pairs) {
    f.pairing.push_back(p);
    f.bridges.push_back(std::move(b));
  }
  return f;
}

}  // namespace

ExcursionDecomposition decompose(const LoopSoup& soup, std::span<const VertexId> F1,
                                 std::span<const VertexId> F2) {
  if (!soup.domain) throw std::invalid_argument("soup without domain");
  const Domain& d = *soup.domain;
  const auto& g = d.graph();
  const auto label = labels(d, {{F1.begin(), F1.end()}, {F2.begin(), F2.end()}});
  const ReversalInvolution* iota = involution_for(soup);

  ExcursionDecomposition out;
  out.orientation = soup.orientation;
  std::vector<Occurrence> occ;
  std::vector<std::vector<EdgePath>> arcs;  // per touching loop
  std::vector<std::vector<std::size_t>> loop_occ;
  for (const auto& loop : soup.loops) {
    std::vector<std::size_t> cuts;
    bool hits_f1 = false;
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const int l = label[static_cast<std::size_t>(g.tail(loop[i]))];
      if (l == 1) cuts.push_back(i);
      hits_f1 = hits_f1 || l == 0;
    }
    if (cuts.empty() || !hits_f1) {
      out.residual.push_back(loop);
      continue;
    }
    out.touching.push_back(loop);
    auto parts = split(loop, cuts, [&](const EdgePath& seg) {
      return std::any_of(seg.begin(), seg.end(), [&](EdgeIndex e) { return label[static_cast<std::size_t>(g.tail(e))] == 0; });
    });
    const std::size_t li = arcs.size();
    loop_occ.emplace_back();
    for (std::size_t k = 0; k < parts.pieces.size(); ++k) {
      Occurrence o;
      o.canonical = make_piece(g, std::move(parts.pieces[k]));
      if (iota) {
        Excursion back = reversed(o.canonical, *iota);
        if (back.path < o.canonical.path) {
          o.canonical = std::move(back);
          o.flipped = true;
        }
      }
      o.loop = li;
      o.order = k;
      loop_occ.back().push_back(occ.size());
      occ.push_back(std::move(o));
    }
    arcs.push_back(std::move(parts.arcs));
  }
  out.M = static_cast<int>(out.touching.size());
  rank(occ, [](const Occurrence& o) -> const EdgePath& { return o.canonical.path; });
  out.eta.resize(occ.size());
  for (const auto& o : occ) out.eta[static_cast<std::size_t>(o.index)] = o.canonical;

  if (!iota) {
    for (const auto& e : out.eta) {
      out.X.push_back(e.to);
      out.Y.push_back(e.from);
    }
    out.beta_truth.permutation.assign(occ.size(), -1);
    out.beta_truth.bridges.resize(occ.size());
    for (std::size_t li = 0; li < loop_occ.size(); ++li) {
      const auto& ids = loop_occ[li];
      for (std::size_t k = 0; k < ids.size(); ++k) {
        const auto& from = occ[ids[k]];
        const auto& to = occ[ids[(k + 1) % ids.size()]];
        const auto j = static_cast<std::size_t>(from.index);
        out.beta_truth.permutation[j] = to.index;
        out.beta_truth.bridges[j] = {from.canonical.to, to.canonical.from, arcs[li][k]};
      }
    }
  } else {
    for (const auto& e : out.eta) {
      out.Z.push_back(e.from);
      out.Z.push_back(e.to);
    }
    std::vector<std::tuple<int, int, EdgePath>> links;
    for (std::size_t li = 0; li < loop_occ.size(); ++li) {
      const auto& ids = loop_occ[li];
      for (std::size_t k = 0; k < ids.size(); ++k) {
        const auto& from = occ[ids[k]];
        const auto& to = occ[ids[(k + 1) % ids.size()]];
        const int end_slot = 2 * from.index + (from.flipped ? 0 : 1);
        const int start_slot = 2 * to.index + (to.flipped ? 1 : 0);
        links.emplace_back(end_slot, start_slot, arcs[li][k]);
      }
    }
    out.z_beta_truth = pairing_from_arcs(links, out.Z, *iota);
  }
  return out;
}

std::vector<EdgePath> reassemble(const OrientedMultigraph& graph, const std::vector<Excursion>& eta,
                                 const UnorderedBridgeFamily& beta) {
  if (beta.permutation.size() != eta.size()) throw std::invalid_argument("family size differs from eta");
  std::vector<Link> links(2 * eta.size());
  link_oriented(graph, eta, 0, 0, eta.size(), beta, links);
  return close_loops(eta, links, nullptr);
}

std::vector<EdgePath> reassemble(const OrientedMultigraph& graph, const std::vector<Excursion>& eta,
                                 const ZBridgeFamily& beta) {
  const auto& iota = graph.require_involution();
  std::vector<VertexId> Z;
  for (const auto& e : eta) {
    Z.push_back(e.from);
    Z.push_back(e.to);
  }
  std::vector<int> slots(Z.size());
  std::iota(slots.begin(), slots.end(), 0);
  std::vector<Link> links(Z.size());
  link_pairing(graph, iota, slots, Z, beta, links);
  return close_loops(eta, links, &iota);
}

OrientedCrossings extract_crossings(const LoopSoup& soup, std::span<const VertexId> F1,
                                    std::span<const VertexId> F2) {
  if (!soup.domain) throw std::invalid_argument("soup without domain");
  if (soup.orientation != Orientation::Oriented) throw std::invalid_argument("oriented soup expected");
  const auto& g = soup.domain->graph();
  const auto label = labels(*soup.domain, {{F1.begin(), F1.end()}, {F2.begin(), F2.end()}});
  const auto side = [&](VertexId v) { return label[static_cast<std::size_t>(v)]; };

  // Pieces alternate forward, backward along each loop.
  std::vector<Occurrence> fwd, bwd;
  struct Step {
    bool forward;
    std::size_t id;
  };
  std::vector<std::vector<Step>> order;
  std::vector<std::vector<EdgePath>> arcs;
  for (const auto& loop : soup.loops) {
    const auto cuts = visits(g, loop, label);
    auto parts = split(loop, cuts, [&](const EdgePath& seg) {
      return side(g.tail(seg.front())) != side(g.head(seg.back()));
    });
    if (parts.pieces.empty()) continue;
    const std::size_t li = arcs.size();
    order.emplace_back();
    for (std::size_t k = 0; k < parts.pieces.size(); ++k) {
      Occurrence o;
      o.canonical = make_piece(g, std::move(parts.pieces[k]));
      o.loop = li;
      o.order = k;
      const bool forward = side(o.canonical.from) == 0;
      auto& list = forward ? fwd : bwd;
      order.back().push_back({forward, list.size()});
      list.push_back(std::move(o));
    }
    arcs.push_back(std::move(parts.arcs));
  }
  const auto key = [](const Occurrence& o) -> const EdgePath& { return o.canonical.path; };
  rank(fwd, key);
  rank(bwd, key);

  OrientedCrossings out;
  out.forward.resize(fwd.size());
  out.backward.resize(bwd.size());
  for (const auto& o : fwd) out.forward[static_cast<std::size_t>(o.index)] = o.canonical;
  for (const auto& o : bwd) out.backward[static_cast<std::size_t>(o.index)] = o.canonical;
  for (const auto& c : out.forward) {
    out.X.push_back(c.to);
    out.Y_inner.push_back(c.from);
  }
  for (const auto& c : out.backward) {
    out.Y.push_back(c.from);
    out.X_inner.push_back(c.to);
  }
  out.outer_truth.permutation.assign(fwd.size(), -1);
  out.outer_truth.bridges.resize(fwd.size());
  out.inner_truth.permutation.assign(bwd.size(), -1);
  out.inner_truth.bridges.resize(bwd.size());
  for (std::size_t li = 0; li < order.size(); ++li) {
    const auto& steps = order[li];
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const Step a = steps[k];
      const Step b = steps[(k + 1) % steps.size()];
      const auto& from = (a.forward ? fwd : bwd)[a.id];
      const auto& to = (b.forward ? fwd : bwd)[b.id];
      auto& family = a.forward ? out.outer_truth : out.inner_truth;
      const auto j = static_cast<std::size_t>(from.index);
      family.permutation[j] = to.index;
      family.bridges[j] = {from.canonical.to, to.canonical.from, arcs[li][k]};
    }
  }
  return out;
}

std::vector<EdgePath> reassemble(const OrientedMultigraph& graph, const OrientedCrossings& crossings,
                                 const UnorderedBridgeFamily& outer, const UnorderedBridgeFamily& inner) {
  const std::size_t F = crossings.forward.size();
  const std::size_t B = crossings.backward.size();
  if (outer.permutation.size() != F || inner.permutation.size() != B) {
    throw std::invalid_argument("family sizes differ from the crossings");
  }
  std::vector<Excursion> pieces = crossings.forward;
  pieces.insert(pieces.end(), crossings.backward.begin(), crossings.backward.end());
  std::vector<Link> links(2 * pieces.size());
  link_oriented(graph, pieces, 0, F, B, outer, links);
  link_oriented(graph, pieces, F, 0, F, inner, links);
  return close_loops(pieces, links, nullptr);
}

UnorientedCrossings extract_unoriented_crossings(const LoopSoup& soup,
                                                 const std::vector<std::vector<VertexId>>& sets) {
  if (!soup.domain) throw std::invalid_argument("soup without domain");
  const auto& g = soup.domain->graph();
  const auto& iota = g.require_involution();
  const auto label = labels(*soup.domain, sets);
  const auto side = [&](VertexId v) { return label[static_cast<std::size_t>(v)]; };

  std::vector<Occurrence> occ;
  std::vector<std::vector<std::size_t>> loop_occ;
  std::vector<std::vector<EdgePath>> arcs;
  for (const auto& loop : soup.loops) {
    const auto cuts = visits(g, loop, label);
    auto parts = split(loop, cuts, [&](const EdgePath& seg) {
      return side(g.tail(seg.front())) != side(g.head(seg.back()));
    });
    if (parts.pieces.empty()) continue;
    const std::size_t li = arcs.size();
    loop_occ.emplace_back();
    for (std::size_t k = 0; k < parts.pieces.size(); ++k) {
      Occurrence o;
      o.canonical = make_piece(g, std::move(parts.pieces[k]));
      if (side(o.canonical.from) > side(o.canonical.to)) {
        o.canonical = reversed(o.canonical, iota);
        o.flipped = true;
      }
      o.loop = li;
      o.order = k;
      loop_occ.back().push_back(occ.size());
      occ.push_back(std::move(o));
    }
    arcs.push_back(std::move(parts.arcs));
  }
  rank(occ, [&](const Occurrence& o) {
    return std::make_tuple(side(o.canonical.from), side(o.canonical.to), o.canonical.path);
  });

  UnorientedCrossings out;
  out.crossings.resize(occ.size());
  out.sets.resize(occ.size());
  for (const auto& o : occ) {
    out.crossings[static_cast<std::size_t>(o.index)] = o.canonical;
    out.sets[static_cast<std::size_t>(o.index)] = {side(o.canonical.from), side(o.canonical.to)};
  }
  // slot[i] = (position in Z[lower], position in Z[higher]) of crossing i.
  out.Z.assign(sets.size(), {});
  std::vector<std::pair<int, int>> slot(occ.size());
  for (std::size_t i = 0; i < out.crossings.size(); ++i) {
    const auto [lo, hi] = out.sets[i];
    slot[i].first = static_cast<int>(out.Z[static_cast<std::size_t>(lo)].size());
    out.Z[static_cast<std::size_t>(lo)].push_back(out.crossings[i].from);
    slot[i].second = static_cast<int>(out.Z[static_cast<std::size_t>(hi)].size());
    out.Z[static_cast<std::size_t>(hi)].push_back(out.crossings[i].to);
  }
  std::vector<std::vector<std::tuple<int, int, EdgePath>>> per_set(sets.size());
  for (std::size_t li = 0; li < loop_occ.size(); ++li) {
    const auto& ids = loop_occ[li];
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto& from = occ[ids[k]];
      const auto& to = occ[ids[(k + 1) % ids.size()]];
      const auto fi = static_cast<std::size_t>(from.index);
      const auto ti = static_cast<std::size_t>(to.index);
      // Arrival end of `from` and departure end of `to`, both in the same set.
      const int set = from.flipped ? out.sets[fi].first : out.sets[fi].second;
      const int a = from.flipped ? slot[fi].first : slot[fi].second;
      const int b = to.flipped ? slot[ti].second : slot[ti].first;
      per_set[static_cast<std::size_t>(set)].emplace_back(a, b, arcs[li][k]);
    }
  }
  for (std::size_t k = 0; k < sets.size(); ++k) out.z_truth.push_back(pairing_from_arcs(per_set[k], out.Z[k], iota));
  return out;
}

std::vector<EdgePath> reassemble(const OrientedMultigraph& graph, const UnorientedCrossings& crossings,
                                 const std::vector<ZBridgeFamily>& families) {
  const auto& iota = graph.require_involution();
  if (families.size() != crossings.Z.size()) throw std::invalid_argument("one family per set expected");
  // Global slot of each Z entry.
  std::vector<std::vector<int>> slots(crossings.Z.size());
  for (std::size_t i = 0; i < crossings.crossings.size(); ++i) {
    const auto [lo, hi] = crossings.sets[i];
    slots[static_cast<std::size_t>(lo)].push_back(static_cast<int>(2 * i));
    slots[static_cast<std::size_t>(hi)].push_back(static_cast<int>(2 * i + 1));
  }
  std::vector<Link> links(2 * crossings.crossings.size());
  for (std::size_t k = 0; k < families.size(); ++k) {
    link_pairing(graph, iota, slots[k], crossings.Z[k], families[k], links);
  }
  return close_loops(crossings.crossings, links, &iota);
}

EdgeJumpRecord record_edge_jumps(const LoopSoup& soup, std::span<const EdgeIndex> removed) {
  if (!soup.domain) throw std::invalid_argument("soup without domain");
  const Domain& d = *soup.domain;
  const auto& g = d.graph();
  const auto& iota = g.require_involution();
  EdgeJumpRecord out;
  std::vector<int> which(static_cast<std::size_t>(g.edge_count()), -1);
  for (EdgeIndex e : removed) {
    if (e < 0 || e >= g.edge_count() || !d.contains(g.tail(e)) || !d.contains(g.head(e))) {
      throw std::invalid_argument("removed edge is not an edge of the domain");
    }
    const EdgeIndex rep = std::min(e, iota(e));
    if (which[static_cast<std::size_t>(rep)] >= 0) continue;
    which[static_cast<std::size_t>(rep)] = which[static_cast<std::size_t>(iota(rep))] =
        static_cast<int>(out.edges.size());
    out.edges.push_back(rep);
  }
  out.counts.assign(out.edges.size(), 0);

  std::vector<Occurrence> occ;
  std::vector<int> occ_edge;
  std::vector<std::vector<std::size_t>> loop_occ;
  std::vector<std::vector<EdgePath>> arcs;
  for (const auto& loop : soup.loops) {
    std::vector<std::size_t> cuts;
    for (std::size_t i = 0; i < loop.size(); ++i) {
      if (which[static_cast<std::size_t>(loop[i])] >= 0) {
        if (cuts.empty() || cuts.back() != i) cuts.push_back(i);
        if (i + 1 < loop.size()) cuts.push_back(i + 1);
      }
    }
    if (cuts.empty()) {
      out.residual.push_back(loop);
      continue;
    }
    // A removed step at the last position wraps around to position 0.
    if (cuts.front() != 0 && which[static_cast<std::size_t>(loop.back())] >= 0) cuts.insert(cuts.begin(), 0);
    out.touching.push_back(loop);
    auto parts = split(loop, cuts, [&](const EdgePath& seg) {
      return seg.size() == 1 && which[static_cast<std::size_t>(seg[0])] >= 0;
    });
    const std::size_t li = arcs.size();
    loop_occ.emplace_back();
    for (std::size_t k = 0; k < parts.pieces.size(); ++k) {
      const EdgeIndex e = parts.pieces[k][0];
      const int w = which[static_cast<std::size_t>(e)];
      Occurrence o;
      const EdgeIndex rep = out.edges[static_cast<std::size_t>(w)];
      o.canonical = make_piece(g, {rep});
      o.flipped = e != rep;
      o.loop = li;
      o.order = k;
      ++out.counts[static_cast<std::size_t>(w)];
      loop_occ.back().push_back(occ.size());
      occ.push_back(std::move(o));
      occ_edge.push_back(w);
    }
    arcs.push_back(std::move(parts.arcs));
  }
  {
    std::vector<std::size_t> ids(occ.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return occ_edge[a] < occ_edge[b]; });
    for (std::size_t r = 0; r < ids.size(); ++r) occ[ids[r]].index = static_cast<int>(r);
    out.Z.resize(2 * occ.size());
    for (const auto& o : occ) {
      out.Z[2 * static_cast<std::size_t>(o.index)] = o.canonical.from;
      out.Z[2 * static_cast<std::size_t>(o.index) + 1] = o.canonical.to;
    }
  }
  std::vector<std::tuple<int, int, EdgePath>> links;
  for (std::size_t li = 0; li < loop_occ.size(); ++li) {
    const auto& ids = loop_occ[li];
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto& from = occ[ids[k]];
      const auto& to = occ[ids[(k + 1) % ids.size()]];
      links.emplace_back(2 * from.index + (from.flipped ? 0 : 1), 2 * to.index + (to.flipped ? 1 : 0), arcs[li][k]);
    }
  }
  out.beta_truth = pairing_from_arcs(links, out.Z, iota);
  return out;
}

std::vector<EdgePath> reassemble_jumps(const OrientedMultigraph& graph, const std::vector<EdgeIndex>& edges,
                                       const std::vector<int>& counts, const ZBridgeFamily& beta) {
  if (edges.size() != counts.size()) throw std::invalid_argument("one count per edge expected");
  std::vector<Excursion> pieces;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (int k = 0; k < counts[i]; ++k) pieces.push_back(make_piece(graph, {edges[i]}));
  }
  return reassemble(graph, pieces, beta);
}

std::vector<int> CtExcursionSet::endpoint_counts() const {
  std::vector<int> out(sites.size(), 0);
  for (const auto& x : excursions) {
    for (std::size_t i = 0; i < sites.size(); ++i) {
      out[i] += (x.skeleton.from == sites[i] ? 1 : 0) + (x.skeleton.to == sites[i] ? 1 : 0);
    }
  }
  return out;
}

std::vector<int> CtExcursionSet::balance() const {
  std::vector<int> out(sites.size(), 0);
  for (const auto& x : excursions) {
    for (std::size_t i = 0; i < sites.size(); ++i) {
      out[i] += (x.skeleton.from == sites[i] ? 1 : 0) - (x.skeleton.to == sites[i] ? 1 : 0);
    }
  }
  return out;
}

CtExcursionSet ct_excursions(const ContinuousTimeSoup& soup, std::span<const VertexId> sites) {
  const LoopSoup& jumps = soup.jump_soup;
  if (!jumps.domain) throw std::invalid_argument("soup without domain");
  const Domain& d = *jumps.domain;
  const auto& g = d.graph();
  const auto label = labels(d, {{sites.begin(), sites.end()}});
  const ReversalInvolution* iota = involution_for(jumps);

  CtExcursionSet out;
  out.sites.assign(sites.begin(), sites.end());
  const auto field = occupation_field(soup);
  for (VertexId x : out.sites) out.local_times.push_back(field.site_times[static_cast<std::size_t>(d.local(x))]);
  for (std::size_t k = 0; k < jumps.loops.size(); ++k) {
    const auto& loop = jumps.loops[k];
    const auto& hold = soup.holding[k];
    const auto cuts = visits(g, loop, label);
    const std::size_t n = loop.size();
    for (std::size_t c = 0; c < cuts.size(); ++c) {
      const std::size_t start = cuts[c];
      const std::size_t len = cuts.size() == 1 ? n : (cuts[(c + 1) % cuts.size()] + n - start - 1) % n + 1;
      CtExcursion x;
      x.skeleton = make_piece(g, cyclic_slice(loop, start, len));
      for (std::size_t i = 1; i < len; ++i) x.interior.push_back(hold[(start + i) % n]);
      if (iota) {
        Excursion back = reversed(x.skeleton, *iota);
        if (back.path < x.skeleton.path) {
          x.skeleton = std::move(back);
          std::reverse(x.interior.begin(), x.interior.end());
        }
      }
      out.excursions.push_back(std::move(x));
    }
  }
  std::sort(out.excursions.begin(), out.excursions.end());
  return out;
}

nlohmann::ordered_json to_json(const ExcursionDecomposition& d, const OrientedMultigraph& graph) {
  nlohmann::ordered_json j;
  j["N"] = d.N();
  j["M"] = d.M;
  auto eta = nlohmann::ordered_json::array();
  for (const auto& e : d.eta) eta.push_back(edge_ids(graph, e.path));
  j["eta"] = eta;
  if (d.orientation == Orientation::Oriented) {
    j["X"] = d.X;
    j["Y"] = d.Y;
    j["beta"] = to_json(d.beta_truth, graph);
  } else {
    j["Z"] = d.Z;
    j["beta"] = to_json(d.z_beta_truth, graph);
  }
  return j;
}

}  // namespace loopsoup
