#include "loopsoup/soup.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "loopsoup/green.hpp"

namespace loopsoup {

std::map<EdgePath, int> LoopSoup::counts() const {
  std::map<EdgePath, int> out;
  for (const auto& l : loops) ++out[l];
  return out;
}

CatalogSampler::CatalogSampler(std::shared_ptr<const LoopCatalog> catalog, double intensity)
    : catalog_(std::move(catalog)),
      domain_(std::make_shared<const Domain>(catalog_->domain)),
      intensity_(intensity),
      total_(intensity * catalog_->total_mass_d()) {
  if (intensity <= 0) throw std::invalid_argument("soup intensity must be positive");
  std::vector<double> weights;
  weights.reserve(catalog_->classes.size());
  for (const auto& c : catalog_->classes) weights.push_back(c.mass_d);
  if (!weights.empty()) pick_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
}

LoopSoup CatalogSampler::sample(Rng& rng) {
  LoopSoup soup{domain_, catalog_->orientation, intensity_, catalog_->L_max, {}};
  if (total_ <= 0) return soup;
  const long n = std::poisson_distribution<long>(total_)(rng);
  soup.loops.reserve(static_cast<std::size_t>(n));
  for (long k = 0; k < n; ++k) soup.loops.push_back(catalog_->classes[pick_(rng)].canonical);
  std::sort(soup.loops.begin(), soup.loops.end());
  return soup;
}

LoopSoup sample_oriented_soup(std::shared_ptr<const LoopCatalog> catalog, double alpha, Rng& rng) {
  if (catalog->orientation != Orientation::Oriented) {
    throw std::invalid_argument("oriented soup needs an oriented catalog");
  }
  return CatalogSampler(std::move(catalog), alpha).sample(rng);
}

LoopSoup sample_unoriented_soup(std::shared_ptr<const LoopCatalog> catalog, double c, Rng& rng) {
  if (catalog->orientation != Orientation::Unoriented) {
    throw std::invalid_argument("unoriented soup needs an unoriented catalog");
  }
  return CatalogSampler(std::move(catalog), c).sample(rng);
}

long sample_negative_binomial(double r, double p, Rng& rng) {
  if (p <= 0) return 0;
  const double rate = std::gamma_distribution<double>(r, p / (1.0 - p))(rng);
  if (rate <= 0) return 0;
  return std::poisson_distribution<long>(rate)(rng);
}

EdgePath sample_return_excursion(const Domain& domain, VertexId x, Rng& rng) {
  const auto& graph = domain.graph();
  const auto g = static_cast<std::uint64_t>(graph.g());
  EdgePath path;
  for (;;) {
    path.clear();
    VertexId z = x;
    bool killed = false;
    do {
      const EdgeIndex e = graph.out_edges(z)[rng.below(g)];
      if (!domain.edge_usable(e)) {
        killed = true;
        break;
      }
      path.push_back(e);
      z = graph.head(e);
    } while (z != x);
    if (!killed) return path;
  }
}

std::vector<std::vector<int>> chinese_restaurant_cycles(int k, double theta, Rng& rng) {
  std::vector<int> next(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    if (rng.uniform() * (theta + i) < theta) {
      next[static_cast<std::size_t>(i)] = i;
    } else {
      const auto j = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i)));
      next[static_cast<std::size_t>(i)] = next[j];
      next[j] = i;
    }
  }
  std::vector<std::vector<int>> cycles;
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int i = 0; i < k; ++i) {
    if (seen[static_cast<std::size_t>(i)]) continue;
    auto& cycle = cycles.emplace_back();
    for (int j = i; !seen[static_cast<std::size_t>(j)]; j = next[static_cast<std::size_t>(j)]) {
      seen[static_cast<std::size_t>(j)] = true;
      cycle.push_back(j);
    }
  }
  return cycles;
}

ExactSoupSampler::ExactSoupSampler(Domain domain, Orientation orientation, double intensity)
    : domain_(std::make_shared<const Domain>(std::move(domain))),
      orientation_(orientation),
      intensity_(intensity),
      alpha_(orientation == Orientation::Oriented ? intensity : intensity / 2) {
  if (intensity <= 0) throw std::invalid_argument("soup intensity must be positive");
  if (orientation == Orientation::Unoriented) domain_->graph().require_involution();
  order_ = domain_->vertices();
  auto current = domain_;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const VertexId x = order_[i];
    const GreenMatrix green = green_function(*current);
    shrinking_.push_back(current);
    return_probability_.push_back(1.0 - 1.0 / green(x, x));
    if (i + 1 < order_.size()) {
      const VertexId drop[] = {x};
      current = std::make_shared<const Domain>(current->without(drop));
    }
  }
}

LoopSoup ExactSoupSampler::sample(Rng& rng) const {
  LoopSoup soup{domain_, orientation_, intensity_, 0, {}};
  const ReversalInvolution* iota = domain_->graph().involution();
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const long k = sample_negative_binomial(alpha_, return_probability_[i], rng);
    if (k == 0) continue;
    std::vector<EdgePath> excursions;
    excursions.reserve(static_cast<std::size_t>(k));
    for (long j = 0; j < k; ++j) {
      excursions.push_back(sample_return_excursion(*shrinking_[i], order_[i], rng));
    }
    for (const auto& cycle : chinese_restaurant_cycles(static_cast<int>(k), alpha_, rng)) {
      EdgePath loop;
      for (int j : cycle) {
        const auto& ex = excursions[static_cast<std::size_t>(j)];
        loop.insert(loop.end(), ex.begin(), ex.end());
      }
      soup.loops.push_back(orientation_ == Orientation::Oriented ? oriented_key(loop)
                                                                 : unoriented_key(loop, *iota));
    }
  }
  std::sort(soup.loops.begin(), soup.loops.end());
  return soup;
}

LoopSoup orient_randomly(const LoopSoup& soup, Rng& rng, const LoopCatalog* oriented) {
  if (soup.orientation != Orientation::Unoriented) {
    throw std::invalid_argument("orient_randomly needs an unoriented soup");
  }
  const ReversalInvolution& iota = soup.domain->graph().require_involution();
  LoopSoup out{soup.domain, Orientation::Oriented, soup.intensity / 2, soup.L_max, {}};
  out.loops.reserve(soup.loops.size());
  for (const auto& loop : soup.loops) {
    const EdgePath back = minimal_rotation(reverse_path(loop, iota));
    const EdgePath& choice = (back == loop || !rng.coin()) ? loop : back;
    if (oriented && !oriented->find(choice)) {
      throw std::invalid_argument("oriented catalog lacks a preimage of an unoriented class");
    }
    out.loops.push_back(choice);
  }
  std::sort(out.loops.begin(), out.loops.end());
  return out;
}

LoopSoup forget_orientation(const LoopSoup& soup) {
  if (soup.orientation != Orientation::Oriented) {
    throw std::invalid_argument("forget_orientation needs an oriented soup");
  }
  const ReversalInvolution& iota = soup.domain->graph().require_involution();
  LoopSoup out{soup.domain, Orientation::Unoriented, soup.intensity * 2, soup.L_max, {}};
  out.loops.reserve(soup.loops.size());
  for (const auto& loop : soup.loops) out.loops.push_back(unoriented_key(loop, iota));
  std::sort(out.loops.begin(), out.loops.end());
  return out;
}

ContinuousTimeSoup attach_holding_times(LoopSoup soup, Rng& rng) {
  const Domain& domain = *soup.domain;
  const double g = domain.g();
  const double alpha = soup.orientation == Orientation::Oriented ? soup.intensity : soup.intensity / 2;
  ContinuousTimeSoup out;
  std::exponential_distribution<double> hold(g);
  out.holding.reserve(soup.loops.size());
  for (const auto& loop : soup.loops) {
    auto& h = out.holding.emplace_back(loop.size());
    for (auto& t : h) t = hold(rng);
  }
  std::gamma_distribution<double> trivial(alpha, 1.0 / g);
  out.trivial_field.resize(static_cast<std::size_t>(domain.size()));
  for (auto& t : out.trivial_field) t = trivial(rng);
  out.jump_soup = std::move(soup);
  return out;
}

ContinuousTimeSoup sample_ct_soup(std::shared_ptr<const LoopCatalog> catalog, double alpha, Rng& rng) {
  Rng jumps = rng.substream(rng());
  Rng times = rng.substream(rng());
  return attach_holding_times(CatalogSampler(std::move(catalog), alpha).sample(jumps), times);
}

OrientedMultigraph augment_stationary(const OrientedMultigraph& graph, int extra) {
  auto specs = graph.specs();
  int next_id = specs.empty() ? 0 : specs.back().id + 1;
  for (VertexId v = 0; v < graph.vertex_count(); ++v) {
    for (int k = 0; k < extra; ++k) specs.push_back(EdgeSpec{next_id++, v, v, true, std::nullopt});
  }
  return build_graph(graph.vertex_count(), std::move(specs), graph.involution() != nullptr);
}

DiscretizedCtSampler::DiscretizedCtSampler(const Domain& domain, Orientation orientation,
                                           double intensity, int M)
    : domain_(std::make_shared<const Domain>(domain)),
      M_(M),
      original_edges_(domain.graph().edge_count()),
      orientation_(orientation) {
  if (M < 1) throw std::invalid_argument("discretization needs M >= 1");
  auto graph = std::make_shared<const OrientedMultigraph>(augment_stationary(domain.graph(), M));
  augmented_.emplace(Domain(graph, domain.vertices(), domain.removed_edges()), orientation, intensity);
}

namespace {

// Canonical form of a loop carrying per-step data, keeping the data aligned.
std::pair<EdgePath, std::vector<double>> canonical_with_times(const EdgePath& loop,
                                                              const std::vector<double>& times,
                                                              const ReversalInvolution* iota) {
  const std::size_t n = loop.size();
  EdgePath path = loop;
  std::vector<double> t = times;
  if (iota) {
    EdgePath back = reverse_path(loop, *iota);
    if (minimal_rotation(back) < minimal_rotation(loop)) {
      // Reversed step j leaves the site that step n-j left from originally.
      std::vector<double> tb(n);
      for (std::size_t j = 0; j < n; ++j) tb[j] = times[(n - j) % n];
      path = std::move(back);
      t = std::move(tb);
    }
  }
  const std::size_t k = least_rotation(path);
  std::vector<double> tr(n);
  for (std::size_t j = 0; j < n; ++j) tr[j] = t[(j + k) % n];
  return {rotate(path, k), std::move(tr)};
}

}  // namespace

ContinuousTimeSoup DiscretizedCtSampler::sample(Rng& rng) const {
  const LoopSoup fine = augmented_->sample(rng);
  const Domain& domain = *domain_;
  const auto& graph = domain.graph();
  const ReversalInvolution* iota = orientation_ == Orientation::Unoriented ? &graph.require_involution() : nullptr;
  const double dt = 1.0 / M_;

  ContinuousTimeSoup out;
  out.jump_soup = LoopSoup{domain_, fine.orientation, fine.intensity, 0, {}};
  out.trivial_field.assign(static_cast<std::size_t>(domain.size()), 0.0);
  std::vector<std::pair<EdgePath, std::vector<double>>> loops;
  for (const auto& loop : fine.loops) {
    const std::size_t n = loop.size();
    std::size_t first = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (loop[i] < original_edges_) {
        first = i;
        break;
      }
    }
    if (first == n) {
      const VertexId x = augmented_->domain().graph().tail(loop[0]);
      out.trivial_field[static_cast<std::size_t>(domain.local(x))] += static_cast<double>(n) * dt;
      continue;
    }
    EdgePath skeleton;
    std::vector<double> times;
    int run = 0;
    // Start just after an original step so every run is seen before its step.
    for (std::size_t s = 1; s <= n; ++s) {
      const EdgeIndex e = loop[(first + s) % n];
      if (e >= original_edges_) {
        ++run;
      } else {
        skeleton.push_back(e);
        times.push_back((1 + run) * dt);
        run = 0;
      }
    }
    loops.push_back(canonical_with_times(skeleton, times, iota));
  }
  std::sort(loops.begin(), loops.end());
  for (auto& [path, times] : loops) {
    out.jump_soup.loops.push_back(std::move(path));
    out.holding.push_back(std::move(times));
  }
  return out;
}

int OccupationField::jumps(EdgeIndex e) const {
  auto it = oriented.find(e);
  return it == oriented.end() ? 0 : it->second;
}

std::pair<int, int> OccupationField::pair(EdgeIndex e, const ReversalInvolution& iota) const {
  return {jumps(e), jumps(iota(e))};
}

OccupationField occupation_field(const LoopSoup& soup) {
  OccupationField f;
  const ReversalInvolution* iota = soup.domain ? soup.domain->graph().involution() : nullptr;
  for (const auto& loop : soup.loops) {
    for (EdgeIndex e : loop) {
      ++f.oriented[e];
      if (iota) ++f.unoriented[std::min(e, (*iota)(e))];
    }
  }
  return f;
}

OccupationField occupation_field(const ContinuousTimeSoup& soup) {
  OccupationField f = occupation_field(soup.jump_soup);
  const Domain& domain = *soup.jump_soup.domain;
  f.site_times = soup.trivial_field;
  for (std::size_t k = 0; k < soup.jump_soup.loops.size(); ++k) {
    const auto& loop = soup.jump_soup.loops[k];
    for (std::size_t i = 0; i < loop.size(); ++i) {
      f.site_times[static_cast<std::size_t>(domain.local(domain.graph().tail(loop[i])))] +=
          soup.holding[k][i];
    }
  }
  return f;
}

void write_soup_jsonl(std::ostream& out, const LoopSoup& soup) {
  const auto& graph = soup.domain->graph();
  for (const auto& [loop, count] : soup.counts()) {
    nlohmann::ordered_json j;
    j["loop"] = edge_ids(graph, loop);
    j["count"] = count;
    out << j.dump() << "\n";
  }
}

void write_soup_jsonl(std::ostream& out, const ContinuousTimeSoup& soup) {
  const auto& graph = soup.jump_soup.domain->graph();
  for (std::size_t k = 0; k < soup.jump_soup.loops.size(); ++k) {
    nlohmann::ordered_json j;
    j["loop"] = edge_ids(graph, soup.jump_soup.loops[k]);
    j["holding"] = soup.holding[k];
    out << j.dump() << "\n";
  }
  nlohmann::ordered_json t;
  t["trivial_field"] = soup.trivial_field;
  out << t.dump() << "\n";
}

}  // namespace loopsoup
