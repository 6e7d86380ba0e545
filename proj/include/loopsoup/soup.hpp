#pragma once

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "loopsoup/graph.hpp"
#include "loopsoup/loops.hpp"
#include "loopsoup/rng.hpp"

namespace loopsoup {

/// A realization of a Poisson loop soup: the occurring loops as canonical
/// keys (oriented or unoriented), sorted, with repetitions.
struct LoopSoup {
  std::shared_ptr<const Domain> domain;
  Orientation orientation = Orientation::Oriented;
  /// α for oriented soups, c for unoriented ones.
  double intensity = 0.0;
  /// Length cap of the catalog it was drawn from; 0 when untruncated.
  int L_max = 0;
  std::vector<EdgePath> loops;

  std::map<EdgePath, int> counts() const;
  std::size_t size() const { return loops.size(); }
};

/// Draws from the truncated Poisson soup with intensity `intensity` times the
/// catalog masses. Precomputes the class distribution once.
class CatalogSampler {
 public:
  CatalogSampler(std::shared_ptr<const LoopCatalog> catalog, double intensity);
  LoopSoup sample(Rng& rng);
  const LoopCatalog& catalog() const { return *catalog_; }

 private:
  std::shared_ptr<const LoopCatalog> catalog_;
  std::shared_ptr<const Domain> domain_;
  double intensity_;
  double total_;
  std::discrete_distribution<std::size_t> pick_;
};

LoopSoup sample_oriented_soup(std::shared_ptr<const LoopCatalog> catalog, double alpha, Rng& rng);
LoopSoup sample_unoriented_soup(std::shared_ptr<const LoopCatalog> catalog, double c, Rng& rng);

/// Exact sampler for the untruncated soup. Vertices x_1..x_n of D are taken
/// in order; the loops visiting x_i inside D_i = D \ {x_1..x_{i-1}} are built
/// from K ~ NegBin(α, 1 - 1/G_{D_i}(x_i, x_i)) excursions from x_i, grouped
/// into loops by a Chinese restaurant process with parameter α.
class ExactSoupSampler {
 public:
  ExactSoupSampler(Domain domain, Orientation orientation, double intensity);
  LoopSoup sample(Rng& rng) const;
  const Domain& domain() const { return *domain_; }

 private:
  std::shared_ptr<const Domain> domain_;
  Orientation orientation_;
  double intensity_;
  double alpha_;
  std::vector<VertexId> order_;
  std::vector<std::shared_ptr<const Domain>> shrinking_;
  std::vector<double> return_probability_;
};

/// Uniform orientation of each occurrence; intensity c becomes α = c/2.
/// Throws std::invalid_argument if a preimage is missing from `oriented`.
LoopSoup orient_randomly(const LoopSoup& soup, Rng& rng, const LoopCatalog* oriented = nullptr);
/// Unoriented image; intensity α becomes c = 2α.
LoopSoup forget_orientation(const LoopSoup& soup);

struct ContinuousTimeSoup {
  LoopSoup jump_soup;
  /// holding[k][i] is the time spent at tail(loops[k][i]) before step i.
  std::vector<std::vector<double>> holding;
  /// Occupation from loops with no jumps, indexed like domain->vertices().
  std::vector<double> trivial_field;
};

/// Adds Exp(mean 1/g) holding times and Gamma(α, 1/g) trivial occupation
/// (α = c/2 for unoriented soups).
ContinuousTimeSoup attach_holding_times(LoopSoup soup, Rng& rng);
ContinuousTimeSoup sample_ct_soup(std::shared_ptr<const LoopCatalog> catalog, double alpha, Rng& rng);

/// Reference sampler: exact discrete soup on the graph with M extra
/// stationary self-edges per vertex, time step 1/M. Loops of added edges
/// only become trivial occupation; elsewhere each original step is held for
/// (1 + preceding run of added steps) / M.
class DiscretizedCtSampler {
 public:
  DiscretizedCtSampler(const Domain& domain, Orientation orientation, double intensity, int M);
  ContinuousTimeSoup sample(Rng& rng) const;

 private:
  std::shared_ptr<const Domain> domain_;
  int M_;
  int original_edges_;
  std::optional<ExactSoupSampler> augmented_;
  Orientation orientation_;
};

/// Graph with `extra` stationary self-edges per vertex (new ids follow the old).
OrientedMultigraph augment_stationary(const OrientedMultigraph& graph, int extra);

struct OccupationField {
  /// Jumps per oriented edge index, zero entries omitted.
  std::map<EdgeIndex, int> oriented;
  /// Jumps per unoriented class (keyed by representative); empty without ι.
  std::map<EdgeIndex, int> unoriented;
  /// Continuous time only: total time at each domain vertex (local index).
  std::vector<double> site_times;

  int jumps(EdgeIndex e) const;
  /// (N_1(e), N_2(e)) for the pair {e, ι(e)}.
  std::pair<int, int> pair(EdgeIndex e, const ReversalInvolution& iota) const;
};

OccupationField occupation_field(const LoopSoup& soup);
OccupationField occupation_field(const ContinuousTimeSoup& soup);

/// JSON lines: {"loop": [ids], "count": k} per class, plus holding times for
/// continuous-time soups.
void write_soup_jsonl(std::ostream& out, const LoopSoup& soup);
void write_soup_jsonl(std::ostream& out, const ContinuousTimeSoup& soup);

/// Samples a NegBin(r, p) count (number of successes with success
/// probability p before r failures) as a Gamma-Poisson mixture.
long sample_negative_binomial(double r, double p, Rng& rng);

/// Excursion from x in the domain conditioned to return to x, by rejection.
EdgePath sample_return_excursion(const Domain& domain, VertexId x, Rng& rng);

/// Splits the sequence 0..k-1 into cycles by a Chinese restaurant process
/// with parameter theta (Ewens permutation); each cycle lists the order in
/// which its elements are concatenated.
std::vector<std::vector<int>> chinese_restaurant_cycles(int k, double theta, Rng& rng);

}  // namespace loopsoup
