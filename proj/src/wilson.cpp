#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "loopsoup/green.hpp"
#include "verify_internal.hpp"

namespace loopsoup {

using namespace detail;

WilsonResult wilson_ust(const Domain& domain, Rng& rng) {
  const auto& g = domain.graph();
  const int n = domain.size();
  std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
  WilsonResult out;
  out.parent.assign(static_cast<std::size_t>(n), -1);
  out.erased = LoopSoup{std::make_shared<const Domain>(domain), Orientation::Oriented, 1.0, 0, {}};

  constexpr long kMaxSteps = 100'000'000;
  for (int start = 0; start < n; ++start) {
    if (in_tree[static_cast<std::size_t>(start)]) continue;
    // Current loop-erased path, the edges between its vertices, and for each
    // path vertex the excursions from it completed since it was first reached.
    std::vector<int> path{start};
    std::vector<EdgeIndex> steps;
    std::vector<std::vector<EdgePath>> excursions(1);
    std::vector<int> position(static_cast<std::size_t>(n), -1);
    position[static_cast<std::size_t>(start)] = 0;
    EdgePath walk;  // walk since the last visit to path.back()
    EdgeIndex exit = -1;
    for (long t = 0; exit < 0; ++t) {
      if (t == kMaxSteps) throw std::invalid_argument("walk does not reach the root");
      const auto choices = g.out_edges(domain.vertices()[static_cast<std::size_t>(path.back())]);
      if (choices.empty()) throw std::invalid_argument("vertex without outgoing edges");
      const EdgeIndex e = choices[rng.below(choices.size())];
      if (!domain.edge_usable(e)) {
        exit = e;
        break;
      }
      const int w = domain.local(g.head(e));
      if (in_tree[static_cast<std::size_t>(w)]) {
        exit = e;
        break;
      }
      walk.push_back(e);
      const int k = position[static_cast<std::size_t>(w)];
      if (k < 0) {
        position[static_cast<std::size_t>(w)] = static_cast<int>(path.size());
        path.push_back(w);
        steps.push_back(e);
        excursions.emplace_back();
        walk.clear();
        continue;
      }
      // Back at path vertex w: everything since its last visit is one
      // excursion from w; the path beyond w is erased with its records.
      EdgePath piece;
      for (std::size_t j = static_cast<std::size_t>(k); j < steps.size(); ++j) {
        piece.push_back(steps[j]);
        for (const auto& ex : excursions[j + 1]) piece.insert(piece.end(), ex.begin(), ex.end());
      }
      piece.insert(piece.end(), walk.begin(), walk.end());
      for (std::size_t j = static_cast<std::size_t>(k) + 1; j < path.size(); ++j) position[static_cast<std::size_t>(path[j])] = -1;
      path.resize(static_cast<std::size_t>(k) + 1);
      steps.resize(static_cast<std::size_t>(k));
      excursions.resize(static_cast<std::size_t>(k) + 1);
      excursions[static_cast<std::size_t>(k)].push_back(std::move(piece));
      walk.clear();
    }
    steps.push_back(exit);
    for (std::size_t j = 0; j < path.size(); ++j) {
      in_tree[static_cast<std::size_t>(path[j])] = true;
      out.parent[static_cast<std::size_t>(path[j])] = steps[j];
      const auto& list = excursions[j];
      if (list.empty()) continue;
      for (const auto& cycle : chinese_restaurant_cycles(static_cast<int>(list.size()), 1.0, rng)) {
        EdgePath loop;
        for (int i : cycle) loop.insert(loop.end(), list[static_cast<std::size_t>(i)].begin(), list[static_cast<std::size_t>(i)].end());
        out.erased.loops.push_back(oriented_key(loop));
      }
    }
  }
  std::sort(out.erased.loops.begin(), out.erased.loops.end());
  return out;
}

double spanning_tree_count(const Domain& domain) {
  const Eigen::MatrixXd P = killed_transition(domain);
  const Eigen::MatrixXd L = domain.g() * (Eigen::MatrixXd::Identity(P.rows(), P.cols()) - P);
  return std::round(L.determinant());
}

std::vector<TestReport> verify_wilson(const Domain& domain, const VerifyParams& params) {
  constexpr int kLoopCap = 4;
  const Rng base(params.seed, "wilson");
  struct Tally {
    std::map<std::vector<EdgeIndex>, long> trees;
    std::map<Configuration, long> loops;
  };
  const auto tally = run_blocks<Tally>(
      params.samples, params.threads,
      [&](long begin, long end, Tally& t) {
        for (long i = begin; i < end; ++i) {
          Rng rng = base.substream(static_cast<std::uint64_t>(i));
          auto r = wilson_ust(domain, rng);
          ++t.trees[r.parent];
          Configuration small;
          for (auto& l : r.erased.loops) {
            if (static_cast<int>(l.size()) <= kLoopCap) small.push_back(std::move(l));
          }
          ++t.loops[small];
        }
      },
      [](Tally& into, Tally& from) {
        for (const auto& [k, c] : from.trees) into.trees[k] += c;
        for (const auto& [k, c] : from.loops) into.loops[k] += c;
      });

  const double n = static_cast<double>(params.samples);
  std::vector<TestReport> out;

  const double count = spanning_tree_count(domain);
  auto trees = make_report("wilson.trees", VerifyMode::MonteCarlo, "max_z", params);
  const double p = 1.0 / count;
  for (const auto& [tree, c] : tally.trees) {
    trees.statistic = std::max(trees.statistic, std::abs(static_cast<double>(c) - n * p) / std::sqrt(n * p * (1 - p)));
  }
  trees.tolerance = 3.0;
  trees.details["spanning_trees"] = count;
  trees.details["trees_observed"] = tally.trees.size();
  trees.decide();
  if (static_cast<double>(tally.trees.size()) != count) trees.pass = false;
  out.push_back(std::move(trees));

  // Exact law of the restricted soup: independent Poisson class counts.
  const auto catalog = enumerate_loops(domain, kLoopCap, Orientation::Oriented);
  double total_mass = 0;
  for (const auto& c : catalog.classes) total_mass += c.mass_d;
  double tv = 0, covered = 0;
  for (const auto& [config, c] : tally.loops) {
    double q = std::exp(-total_mass);
    for (std::size_t i = 0; i < config.size();) {
      std::size_t j = i;
      while (j < config.size() && config[j] == config[i]) ++j;
      const auto idx = catalog.find(config[i]);
      if (!idx) throw std::logic_error("erased loop missing from the catalog");
      q *= std::pow(catalog.classes[*idx].mass_d, static_cast<double>(j - i)) / std::tgamma(static_cast<double>(j - i) + 1);
      i = j;
    }
    covered += q;
    tv += std::abs(static_cast<double>(c) / n - q);
  }
  tv = (tv + std::max(0.0, 1.0 - covered)) / 2;
  auto loops = make_report("wilson.loops", VerifyMode::MonteCarlo, "tv", params);
  loops.statistic = tv;
  loops.tolerance = 0.01;
  loops.details["max_loop_length"] = kLoopCap;
  loops.details["classes"] = catalog.classes.size();
  loops.details["configurations_observed"] = tally.loops.size();
  loops.decide();
  out.push_back(std::move(loops));
  return out;
}

}  // namespace loopsoup
