#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "loopsoup/bridges.hpp"
#include "loopsoup/excursions.hpp"
#include "loopsoup/soup.hpp"

namespace loopsoup {

enum class VerifyMode { Exact, MonteCarlo };

/// Outcome of one check. `pass` holds iff the statistic is within tolerance:
/// statistic <= tolerance for distances, statistic >= tolerance for p-values.
struct TestReport {
  std::string prop;
  std::string mode;  // "exact" or "monte-carlo"
  std::string statistic_name;
  double statistic = 0.0;
  double tolerance = 0.0;
  bool higher_is_better = false;
  long samples = 0;
  std::uint64_t seed = 0;
  int L_max = 0;
  double tail_bound = 0.0;
  /// Run at a deliberately wrong intensity; expected to fail.
  bool positive_control = false;
  bool pass = false;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();

  void decide();
  /// Passing ordinary checks and failing positive controls.
  bool as_expected() const { return positive_control ? !pass : pass; }
};

nlohmann::ordered_json to_json(const TestReport& report);

struct VerifyParams {
  VerifyMode mode = VerifyMode::Exact;
  /// α for oriented tests, c for unoriented ones. Defaults to the value the
  /// statement is about.
  double intensity = 1.0;
  int L_max = 6;
  long samples = 100000;
  std::uint64_t seed = 1;
  /// Largest number of excursions, crossings per direction or removed-edge
  /// jumps a conditioning value may carry.
  int max_pieces = 2;
  double tolerance = 1e-9;
  double significance = 1e-3;
  /// Minimum number of samples for a conditioning bin to be tested.
  int min_bin = 200;
  int max_bins = 20;
  bool controls = true;
  double theta = 0.5;
  int threads = 1;
};

/// A loop configuration: canonical loop keys, sorted, with repetitions.
using Configuration = std::vector<EdgePath>;

/// Law on configurations. In exact mode the probabilities are rationals that
/// sum to 1 - truncation_mass.
struct DiscreteDistribution {
  std::map<Configuration, Rational> probabilities;
  Rational truncation_mass = 0;

  Rational total() const;
  void normalize();
};

/// Total variation between two laws on the same key type.
template <class Key>
Rational total_variation_exact(const std::map<Key, Rational>& p, const std::map<Key, Rational>& q) {
  Rational sum = 0;
  auto a = p.begin();
  auto b = q.begin();
  while (a != p.end() || b != q.end()) {
    if (b == q.end() || (a != p.end() && a->first < b->first)) {
      sum += abs(a->second);
      ++a;
    } else if (a == p.end() || b->first < a->first) {
      sum += abs(b->second);
      ++b;
    } else {
      sum += abs(a->second - b->second);
      ++a;
      ++b;
    }
  }
  return sum / 2;
}

/// Visits every multiset of the given catalog classes with total length at
/// most max_length and at most max_loops loops (empty one excluded), with
/// weight Π (intensity · mass)^k / k!.
void for_each_configuration(const LoopCatalog& catalog, const Rational& intensity, int max_length, int max_loops,
                            const std::vector<std::size_t>& classes,
                            const std::function<void(const Configuration&, const Rational&)>& visit);

/// Conditional law of the loops touching F1 and F2 given their excursions
/// away from F2, computed from the Poisson weights of all soups whose loops
/// have total length <= L_max. Throws std::invalid_argument if no such soup
/// has these excursions.
DiscreteDistribution exact_conditional_beta(const Domain& domain, std::span<const VertexId> F1,
                                            std::span<const VertexId> F2, const std::vector<Excursion>& eta,
                                            int L_max, Orientation orientation, const Rational& intensity);

/// Law of the loops obtained by closing eta with a bridge family drawn from
/// B^{D \ F1}, restricted to total bridge length <= max_bridge_length. The
/// truncation mass is the bridge-law mass beyond that length.
DiscreteDistribution bridge_side_law(const Domain& domain, std::span<const VertexId> F1,
                                     const std::vector<Excursion>& eta, int max_bridge_length,
                                     Orientation orientation);

std::vector<TestReport> verify_prop1(const Domain& domain, std::span<const VertexId> F1,
                                     std::span<const VertexId> F2, const VerifyParams& params);
std::vector<TestReport> verify_prop2(const Domain& domain, std::span<const VertexId> F1,
                                     std::span<const VertexId> F2, const VerifyParams& params);
/// Oriented (1bis) for two sets; `unoriented` runs the unoriented version
/// (3bis), which accepts any number of sets.
std::vector<TestReport> verify_prop1bis_3bis(const Domain& domain, const std::vector<std::vector<VertexId>>& sets,
                                             Orientation orientation, const VerifyParams& params);
std::vector<TestReport> verify_prop5(const Domain& domain, std::span<const EdgeIndex> removed,
                                     const VerifyParams& params);
/// Spatial Markov property of the jump-count field across F1 | D \ F1.
std::vector<TestReport> verify_occupation_markov(const Domain& domain, std::span<const VertexId> F1,
                                                 Orientation orientation, const VerifyParams& params);

/// Centred Gaussian vector with covariance G_D, indexed like domain.vertices().
/// Throws std::invalid_argument when G_D is not positive definite.
std::vector<double> sample_gff(const Domain& domain, Rng& rng);
class GffSampler {
 public:
  explicit GffSampler(const Domain& domain);
  std::vector<double> sample(Rng& rng) const;
  const Eigen::MatrixXd& covariance() const { return covariance_; }

 private:
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd factor_;
};

std::vector<TestReport> verify_lejan(const Domain& domain, const VerifyParams& params);

/// Total mass Σ g^{-n} of excursions from sites[i] to sites[j] with every
/// interior vertex in D \ sites.
Eigen::MatrixXd excursion_kernel(const Domain& domain, std::span<const VertexId> sites);

/// Counts of unoriented excursions per site pair (i <= j, row-major over the
/// upper triangle) drawn from independent Poisson laws with means
/// g sqrt(l_i l_j) (H_ij + H_ji) (i < j) and g l_i H_ii, conditioned on an even
/// number of extremities at every site. Rejection sampling.
std::vector<int> sample_conditioned_excursion_counts(const Eigen::MatrixXd& kernel, std::span<const double> local_times,
                                                     int g, Rng& rng);

std::vector<TestReport> verify_ct_excursion_proposition(const Domain& domain, std::span<const VertexId> sites,
                                                        const VerifyParams& params);

/// Edge-count oracle for the whole vertex set. Unoriented: one count per
/// unoriented class, Poisson with mean (number of distinct orientations) ·
/// sqrt(l_x l_y), conditioned on even degree. Oriented: one count per edge,
/// mean sqrt(l_x l_y), conditioned on in-degree = out-degree.
std::vector<int> sample_random_current(const Domain& domain, Orientation orientation,
                                       std::span<const double> local_times, Rng& rng);
std::vector<TestReport> verify_random_currents(const Domain& domain, Orientation orientation,
                                               const VerifyParams& params);

struct WilsonResult {
  /// Edge from each domain vertex (local index) towards the root.
  std::vector<EdgeIndex> parent;
  /// Erased loops grouped into an α = 1 oriented soup.
  LoopSoup erased;
};

/// Wilson's algorithm with every edge leaving D (or removed) leading to one
/// absorbing root. Vertices are started in domain order. The loops erased at
/// each vertex, cut at their returns to it, are grouped into loops by a
/// Chinese restaurant process with θ = 1. Throws std::invalid_argument when
/// some vertex cannot reach the root.
WilsonResult wilson_ust(const Domain& domain, Rng& rng);
/// Number of spanning trees rooted at the absorbing vertex: det(g (I - P_D)).
double spanning_tree_count(const Domain& domain);
std::vector<TestReport> verify_wilson(const Domain& domain, const VerifyParams& params);

}  // namespace loopsoup
