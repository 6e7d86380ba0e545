#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "loopsoup/green.hpp"
#include "loopsoup/stats.hpp"
#include "verify_internal.hpp"

namespace loopsoup {

using namespace detail;

GffSampler::GffSampler(const Domain& domain) : covariance_(green_function(domain).matrix()) {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("Green function is not positive definite");
  factor_ = llt.matrixL();
}

std::vector<double> GffSampler::sample(Rng& rng) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(factor_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  const Eigen::VectorXd phi = factor_ * z;
  return {phi.data(), phi.data() + phi.size()};
}

std::vector<double> sample_gff(const Domain& domain, Rng& rng) { return GffSampler(domain).sample(rng); }

namespace {

constexpr long kMaxRejections = 10'000'000;

int poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<int>(mean)(rng);
}

ContinuousTimeSoup ct_sample(const ExactSoupSampler& sampler, const Rng& base, long i) {
  Rng rng = base.substream(static_cast<std::uint64_t>(i));
  Rng times = rng.substream("holding");
  return attach_holding_times(sampler.sample(rng), times);
}

// Rows of per-sample vectors, in sample order.
using Rows = std::vector<std::vector<double>>;
void append(Rows& into, Rows& from) {
  into.insert(into.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
}

std::vector<double> column(const Rows& rows, std::size_t j) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

// Soup versus oracle: per Σl quantile bin, χ² homogeneity of the capped
// joint count vectors. Returns Bonferroni p and the per-bin details.
struct Homogeneity {
  double p = 1.0;
  nlohmann::ordered_json bins = nlohmann::ordered_json::array();
};

Homogeneity homogeneity(const std::vector<double>& level, const std::vector<std::vector<int>>& soup,
                        const std::vector<std::vector<int>>& oracle, int cap) {
  const int nbins = std::clamp(static_cast<int>(level.size() / 2000), 1, 10);
  const auto edges = quantile_edges(level, nbins);
  std::vector<std::map<std::vector<int>, std::array<double, 2>>> tables(static_cast<std::size_t>(nbins));
  for (std::size_t i = 0; i < level.size(); ++i) {
    auto& t = tables[static_cast<std::size_t>(bin_of(level[i], edges))];
    for (int side = 0; side < 2; ++side) {
      auto key = side == 0 ? soup[i] : oracle[i];
      for (int& k : key) k = std::min(k, cap);
      t[key][static_cast<std::size_t>(side)] += 1.0;
    }
  }
  Homogeneity out;
  std::vector<double> p;
  for (const auto& t : tables) {
    std::vector<std::vector<double>> table(2);
    double n = 0;
    for (const auto& [key, counts] : t) {
      table[0].push_back(counts[0]);
      table[1].push_back(counts[1]);
      n += counts[0];
    }
    if (table[0].size() < 2) continue;
    const auto r = chi_square_independence(table);
    p.push_back(r.p_value);
    out.bins.push_back({{"samples", n}, {"cells", r.cells}, {"p", r.p_value}});
  }
  out.p = bonferroni(p);
  return out;
}

TestReport p_value_report(std::string prop, double p, const VerifyParams& params) {
  auto r = make_report(std::move(prop), VerifyMode::MonteCarlo, "p_value", params);
  r.statistic = p;
  r.tolerance = params.significance;
  r.higher_is_better = true;
  r.decide();
  return r;
}

TestReport violation_report(std::string prop, long violations, const VerifyParams& params) {
  auto r = make_report(std::move(prop), VerifyMode::MonteCarlo, "violations", params);
  r.statistic = static_cast<double>(violations);
  r.tolerance = 0.0;
  r.decide();
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Occupation field = squared GFF.

std::vector<TestReport> verify_lejan(const Domain& domain, const VerifyParams& params) {
  const int n = domain.size();
  const double g = domain.g();
  const GffSampler gff(domain);
  const Eigen::MatrixXd cov = gff.covariance() / g;  // continuous-time Green function

  const auto occupation = [&](double alpha, const std::string& stream) {
    const ExactSoupSampler sampler(domain, Orientation::Oriented, alpha);
    const Rng base(params.seed, stream);
    return run_blocks<Rows>(
        params.samples, params.threads,
        [&](long begin, long end, Rows& out) {
          for (long i = begin; i < end; ++i) out.push_back(occupation_field(ct_sample(sampler, base, i)).site_times);
        },
        append);
  };
  const Rng field_base(params.seed, "lejan.gff");
  const Rows field = run_blocks<Rows>(
      params.samples, params.threads,
      [&](long begin, long end, Rows& out) {
        for (long i = begin; i < end; ++i) {
          Rng rng = field_base.substream(static_cast<std::uint64_t>(i));
          auto phi = gff.sample(rng);
          for (auto& x : phi) x = x * x / (2 * g);
          out.push_back(std::move(phi));
        }
      },
      append);

  const auto ks_against_field = [&](const Rows& soup, nlohmann::ordered_json& details) {
    double worst = 0;
    auto per_site = nlohmann::ordered_json::array();
    for (int x = 0; x < n; ++x) {
      const auto ks = ks_two_sample(column(soup, static_cast<std::size_t>(x)), column(field, static_cast<std::size_t>(x)));
      worst = std::max(worst, ks.statistic);
      per_site.push_back({{"site", domain.vertices()[static_cast<std::size_t>(x)]}, {"ks", ks.statistic}, {"p", ks.p_value}});
    }
    details["sites"] = per_site;
    return worst;
  };

  std::vector<TestReport> out;
  const Rows soup = occupation(0.5, "lejan");

  auto ks = make_report("lejan", VerifyMode::MonteCarlo, "max_ks_distance", params);
  ks.statistic = ks_against_field(soup, ks.details);
  ks.tolerance = 0.01;
  ks.decide();
  out.push_back(std::move(ks));

  // First moments: E[T_x] = G(x,x) / (2g).
  auto mean = make_report("lejan.mean", VerifyMode::MonteCarlo, "max_z", params);
  auto means = nlohmann::ordered_json::array();
  for (int x = 0; x < n; ++x) {
    RunningStats s;
    for (const auto& row : soup) s.add(row[static_cast<std::size_t>(x)]);
    const double expected = cov(x, x) / 2;
    const double z = std::abs(s.mean() - expected) / s.standard_error();
    mean.statistic = std::max(mean.statistic, z);
    means.push_back({{"site", domain.vertices()[static_cast<std::size_t>(x)]}, {"mean", s.mean()}, {"expected", expected},
                     {"standard_error", s.standard_error()}});
  }
  mean.tolerance = 3.0;
  mean.details["sites"] = means;
  mean.decide();
  out.push_back(std::move(mean));

  // Second moments by Wick: E[T_x T_y] = (G_xx G_yy + 2 G_xy^2) / 4.
  auto wick = make_report("lejan.wick", VerifyMode::MonteCarlo, "max_z", params);
  auto pairs = nlohmann::ordered_json::array();
  for (int x = 0; x < n; ++x) {
    for (int y = x; y < n; ++y) {
      RunningStats s;
      for (const auto& row : soup) s.add(row[static_cast<std::size_t>(x)] * row[static_cast<std::size_t>(y)]);
      const double expected = (cov(x, x) * cov(y, y) + 2 * cov(x, y) * cov(x, y)) / 4;
      wick.statistic = std::max(wick.statistic, std::abs(s.mean() - expected) / s.standard_error());
      pairs.push_back({{"x", domain.vertices()[static_cast<std::size_t>(x)]},
                       {"y", domain.vertices()[static_cast<std::size_t>(y)]},
                       {"mean", s.mean()},
                       {"expected", expected}});
    }
  }
  // Pair products are heavy tailed; 4 standard errors over a handful of pairs.
  wick.tolerance = 4.0;
  wick.details["pairs"] = pairs;
  wick.decide();
  out.push_back(std::move(wick));

  if (params.controls) {
    auto control = make_report("lejan.control", VerifyMode::MonteCarlo, "max_ks_distance", params);
    control.statistic = ks_against_field(occupation(1.0, "lejan.control"), control.details);
    control.tolerance = 0.01;
    control.positive_control = true;
    control.details["alpha"] = 1.0;
    control.decide();
    out.push_back(std::move(control));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Excursions away from a site set, given the local times there.

Eigen::MatrixXd excursion_kernel(const Domain& domain, std::span<const VertexId> sites) {
  const Eigen::MatrixXd P = killed_transition(domain);
  std::vector<int> a, b;
  for (VertexId v : sites) {
    if (!domain.contains(v)) throw std::invalid_argument("site outside the domain");
    a.push_back(domain.local(v));
  }
  for (int i = 0; i < domain.size(); ++i) {
    if (std::find(a.begin(), a.end(), i) == a.end()) b.push_back(i);
  }
  const auto block = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
    Eigen::MatrixXd m(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = P(rows[i], cols[j]);
    }
    return m;
  };
  Eigen::MatrixXd H = block(a, a);
  if (!b.empty()) {
    const Eigen::MatrixXd Pbb = block(b, b);
    const Eigen::MatrixXd inner = (Eigen::MatrixXd::Identity(Pbb.rows(), Pbb.cols()) - Pbb).inverse();
    H += block(a, b) * inner * block(b, a);
  }
  return H;
}

namespace {

// Means of the unordered pair counts, upper triangle row-major.
std::vector<double> pair_means(const Eigen::MatrixXd& H, std::span<const double> l, int g) {
  std::vector<double> out;
  const auto n = H.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double li = l[static_cast<std::size_t>(i)], lj = l[static_cast<std::size_t>(j)];
      out.push_back(i == j ? g * li * H(i, i) : g * std::sqrt(li * lj) * (H(i, j) + H(j, i)));
    }
  }
  return out;
}

std::vector<int> pair_counts(const CtExcursionSet& set, const std::vector<VertexId>& sites) {
  const auto n = static_cast<int>(sites.size());
  std::vector<int> out(static_cast<std::size_t>(n * (n + 1) / 2), 0);
  const auto idx = [&](VertexId v) {
    return static_cast<int>(std::find(sites.begin(), sites.end(), v) - sites.begin());
  };
  for (const auto& e : set.excursions) {
    int i = idx(e.skeleton.from), j = idx(e.skeleton.to);
    if (i > j) std::swap(i, j);
    ++out[static_cast<std::size_t>(i * n - i * (i - 1) / 2 + (j - i))];
  }
  return out;
}

bool even_extremities(const std::vector<int>& counts, int n) {
  std::vector<int> ends(static_cast<std::size_t>(n), 0);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j, ++k) {
      if (i == j) continue;
      ends[static_cast<std::size_t>(i)] += counts[static_cast<std::size_t>(k)];
      ends[static_cast<std::size_t>(j)] += counts[static_cast<std::size_t>(k)];
    }
  }
  return std::all_of(ends.begin(), ends.end(), [](int e) { return e % 2 == 0; });
}

EdgePath smaller_direction(const EdgePath& path, const ReversalInvolution& iota) {
  EdgePath back = reverse_path(path, iota);
  return std::min(path, back);
}

// Unoriented excursion classes between sites with at most max_length jumps:
// key (smaller direction) -> number of distinct orientations.
std::map<EdgePath, int> excursion_classes(const Domain& domain, std::span<const VertexId> sites, VertexId from,
                                          int max_length) {
  const auto& g = domain.graph();
  const auto& iota = g.require_involution();
  std::map<EdgePath, int> out;
  EdgePath path;
  const auto is_site = [&](VertexId v) { return std::find(sites.begin(), sites.end(), v) != sites.end(); };
  const auto extend = [&](auto&& self, VertexId at) -> void {
    if (static_cast<int>(path.size()) == max_length) return;
    for (EdgeIndex e : g.out_edges(at)) {
      if (!domain.edge_usable(e)) continue;
      path.push_back(e);
      if (is_site(g.head(e))) {
        const EdgePath key = smaller_direction(path, iota);
        out[key] = reverse_path(key, iota) == key ? 1 : 2;
      } else {
        self(self, g.head(e));
      }
      path.pop_back();
    }
  };
  extend(extend, from);
  return out;
}

}  // namespace

std::vector<int> sample_conditioned_excursion_counts(const Eigen::MatrixXd& kernel, std::span<const double> local_times,
                                                     int g, Rng& rng) {
  const auto means = pair_means(kernel, local_times, g);
  const int n = static_cast<int>(kernel.rows());
  std::vector<int> counts(means.size());
  for (long attempt = 0; attempt < kMaxRejections; ++attempt) {
    for (std::size_t k = 0; k < means.size(); ++k) counts[k] = poisson(means[k], rng);
    if (even_extremities(counts, n)) return counts;
  }
  throw std::runtime_error("parity rejection did not accept");
}

std::vector<TestReport> verify_ct_excursion_proposition(const Domain& domain, std::span<const VertexId> sites_in,
                                                        const VerifyParams& params) {
  const std::vector<VertexId> sites(sites_in.begin(), sites_in.end());
  if (sites.empty()) throw std::invalid_argument("no sites");
  const int n = static_cast<int>(sites.size());
  const int g = domain.g();
  const Eigen::MatrixXd H = excursion_kernel(domain, sites);
  const ExactSoupSampler sampler(domain, Orientation::Unoriented, params.intensity);
  const Rng base(params.seed, "ct-excursions");
  const Rng oracle_base(params.seed, "ct-excursions.oracle");

  struct Tally {
    std::vector<double> level;
    std::vector<std::vector<int>> soup, oracle;
    long parity_violations = 0;
    std::map<std::pair<VertexId, VertexId>, std::map<EdgePath, long>> skeletons;
    std::vector<double> interior;
  };
  const auto tally = run_blocks<Tally>(
      params.samples, params.threads,
      [&](long begin, long end, Tally& t) {
        for (long i = begin; i < end; ++i) {
          const auto set = ct_excursions(ct_sample(sampler, base, i), sites);
          const auto counts = pair_counts(set, sites);
          if (!even_extremities(counts, n)) ++t.parity_violations;
          Rng rng = oracle_base.substream(static_cast<std::uint64_t>(i));
          t.oracle.push_back(sample_conditioned_excursion_counts(H, set.local_times, g, rng));
          t.soup.push_back(counts);
          double total = 0;
          for (double x : set.local_times) total += x;
          t.level.push_back(total);
          for (const auto& e : set.excursions) {
            const auto [a, b] = std::minmax(e.skeleton.from, e.skeleton.to);
            ++t.skeletons[{a, b}][e.skeleton.path];
            if (t.interior.size() < 200000) t.interior.insert(t.interior.end(), e.interior.begin(), e.interior.end());
          }
        }
      },
      [](Tally& into, Tally& from) {
        into.level.insert(into.level.end(), from.level.begin(), from.level.end());
        into.soup.insert(into.soup.end(), from.soup.begin(), from.soup.end());
        into.oracle.insert(into.oracle.end(), from.oracle.begin(), from.oracle.end());
        into.parity_violations += from.parity_violations;
        for (const auto& [pair, m] : from.skeletons) {
          for (const auto& [k, c] : m) into.skeletons[pair][k] += c;
        }
        if (into.interior.size() < 200000) into.interior.insert(into.interior.end(), from.interior.begin(), from.interior.end());
      });

  std::vector<TestReport> out;
  out.push_back(violation_report("ct-excursions.parity", tally.parity_violations, params));

  const auto hom = homogeneity(tally.level, tally.soup, tally.oracle, 4);
  auto counts = p_value_report("ct-excursions", hom.p, params);
  counts.statistic_name = "bonferroni_p";
  counts.details["bins"] = hom.bins;
  counts.details["intensity_normalization"] = "g sqrt(l_x l_y) g^-n per oriented excursion";
  out.push_back(std::move(counts));

  // Skeletons within each pair: frequencies proportional to orientations · g^{-n}.
  std::vector<double> p;
  auto pair_details = nlohmann::ordered_json::array();
  for (const auto& [pair, observed] : tally.skeletons) {
    const auto classes = excursion_classes(domain, sites, pair.first, params.L_max);
    const int i = static_cast<int>(std::find(sites.begin(), sites.end(), pair.first) - sites.begin());
    const int j = static_cast<int>(std::find(sites.begin(), sites.end(), pair.second) - sites.begin());
    const double total_mass = i == j ? H(i, i) : H(i, j) + H(j, i);
    long total = 0, matched = 0;
    for (const auto& [k, c] : observed) total += c;
    std::vector<double> obs, exp;
    double mass = 0;
    for (const auto& [key, orientations] : classes) {
      const auto& gr = domain.graph();
      const VertexId a = gr.tail(key.front()), b = gr.head(key.back());
      if (std::pair{std::min(a, b), std::max(a, b)} != pair) continue;
      const double q = orientations * std::pow(static_cast<double>(g), -static_cast<double>(key.size())) / total_mass;
      const auto it = observed.find(key);
      const long c = it == observed.end() ? 0 : it->second;
      matched += c;
      mass += q;
      obs.push_back(static_cast<double>(c));
      exp.push_back(q * static_cast<double>(total));
    }
    obs.push_back(static_cast<double>(total - matched));
    exp.push_back(std::max(0.0, 1.0 - mass) * static_cast<double>(total));
    if (total < params.min_bin) continue;
    const auto r = chi_square_gof(obs, exp);
    p.push_back(r.p_value);
    pair_details.push_back({{"x", pair.first}, {"y", pair.second}, {"excursions", total}, {"p", r.p_value}});
  }
  auto skel = p_value_report("ct-excursions.skeletons", bonferroni(p), params);
  skel.statistic_name = "bonferroni_p";
  skel.details["pairs"] = pair_details;
  out.push_back(std::move(skel));

  const double rate = g;
  const auto ks = ks_one_sample(tally.interior, [rate](double t) { return 1.0 - std::exp(-rate * t); });
  auto times = p_value_report("ct-excursions.interior-times", ks.p_value, params);
  times.details["ks"] = ks.statistic;
  times.details["times"] = tally.interior.size();
  out.push_back(std::move(times));
  return out;
}

// ---------------------------------------------------------------------------
// Random currents: every vertex is a site.

namespace {

struct CurrentCoordinates {
  std::vector<EdgeIndex> edges;  // representatives (unoriented) or edges (oriented)
  std::vector<double> multiplicity;
};

CurrentCoordinates current_coordinates(const Domain& domain, Orientation o) {
  CurrentCoordinates c;
  const auto& g = domain.graph();
  for (EdgeIndex e : domain.usable_edges()) {
    if (o == Orientation::Oriented) {
      c.edges.push_back(e);
      c.multiplicity.push_back(1.0);
      continue;
    }
    const EdgeIndex partner = g.require_involution()(e);
    if (partner < e) continue;
    c.edges.push_back(e);
    c.multiplicity.push_back(partner == e ? 1.0 : 2.0);
  }
  return c;
}

bool current_constraint(const Domain& domain, Orientation o, const CurrentCoordinates& c, const std::vector<int>& counts) {
  const auto& g = domain.graph();
  std::vector<int> a(static_cast<std::size_t>(domain.size()), 0);
  for (std::size_t k = 0; k < c.edges.size(); ++k) {
    const VertexId x = g.tail(c.edges[k]), y = g.head(c.edges[k]);
    if (x == y) continue;
    a[static_cast<std::size_t>(domain.local(x))] += counts[k];
    a[static_cast<std::size_t>(domain.local(y))] += o == Orientation::Oriented ? -counts[k] : counts[k];
  }
  return std::all_of(a.begin(), a.end(), [&](int v) { return o == Orientation::Oriented ? v == 0 : v % 2 == 0; });
}

std::vector<int> current_counts(const LoopSoup& soup, const CurrentCoordinates& c) {
  const auto field = occupation_field(soup);
  const auto& map = soup.orientation == Orientation::Oriented ? field.oriented : field.unoriented;
  std::vector<int> out;
  for (EdgeIndex e : c.edges) {
    const auto it = map.find(e);
    out.push_back(it == map.end() ? 0 : it->second);
  }
  return out;
}

}  // namespace

std::vector<int> sample_random_current(const Domain& domain, Orientation orientation, std::span<const double> l,
                                       Rng& rng) {
  const auto c = current_coordinates(domain, orientation);
  const auto& g = domain.graph();
  std::vector<double> means;
  for (std::size_t k = 0; k < c.edges.size(); ++k) {
    const double lx = l[static_cast<std::size_t>(domain.local(g.tail(c.edges[k])))];
    const double ly = l[static_cast<std::size_t>(domain.local(g.head(c.edges[k])))];
    means.push_back(c.multiplicity[k] * std::sqrt(lx * ly));
  }
  std::vector<int> counts(means.size());
  for (long attempt = 0; attempt < kMaxRejections; ++attempt) {
    for (std::size_t k = 0; k < means.size(); ++k) counts[k] = poisson(means[k], rng);
    if (current_constraint(domain, orientation, c, counts)) return counts;
  }
  throw std::runtime_error("current rejection did not accept");
}

std::vector<TestReport> verify_random_currents(const Domain& domain, Orientation orientation,
                                               const VerifyParams& params) {
  const auto c = current_coordinates(domain, orientation);
  // Unoriented c = 1, oriented α = 1.
  const ExactSoupSampler sampler(domain, orientation, 1.0);
  const std::string prop = orientation == Orientation::Oriented ? "random-currents.oriented" : "random-currents";
  const Rng base(params.seed, prop);
  const Rng oracle_base(params.seed, prop + ".oracle");
  struct Tally {
    std::vector<double> level;
    std::vector<std::vector<int>> soup, oracle;
    long violations = 0;
  };
  const auto tally = run_blocks<Tally>(
      params.samples, params.threads,
      [&](long begin, long end, Tally& t) {
        for (long i = begin; i < end; ++i) {
          const auto ct = ct_sample(sampler, base, i);
          const auto l = occupation_field(ct).site_times;
          auto counts = current_counts(ct.jump_soup, c);
          if (!current_constraint(domain, orientation, c, counts)) ++t.violations;
          Rng rng = oracle_base.substream(static_cast<std::uint64_t>(i));
          t.oracle.push_back(sample_random_current(domain, orientation, l, rng));
          t.soup.push_back(std::move(counts));
          double total = 0;
          for (double x : l) total += x;
          t.level.push_back(total);
        }
      },
      [](Tally& into, Tally& from) {
        into.level.insert(into.level.end(), from.level.begin(), from.level.end());
        into.soup.insert(into.soup.end(), from.soup.begin(), from.soup.end());
        into.oracle.insert(into.oracle.end(), from.oracle.begin(), from.oracle.end());
        into.violations += from.violations;
      });
  std::vector<TestReport> out;
  out.push_back(violation_report(prop + (orientation == Orientation::Oriented ? ".balance" : ".parity"), tally.violations,
                                 params));
  const auto hom = homogeneity(tally.level, tally.soup, tally.oracle, 3);
  auto r = p_value_report(prop, hom.p, params);
  r.statistic_name = "bonferroni_p";
  r.details["bins"] = hom.bins;
  r.details["coordinates"] = c.edges.size();
  out.push_back(std::move(r));
  return out;
}

}  // namespace loopsoup
