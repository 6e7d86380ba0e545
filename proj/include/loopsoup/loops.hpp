#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "loopsoup/graph.hpp"
#include "loopsoup/rational.hpp"

namespace loopsoup {

/// A sequence of edge indices. As a loop, head(e_i) = tail(e_{i+1}) cyclically.
using EdgePath = std::vector<EdgeIndex>;

enum class Orientation { Oriented, Unoriented };

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool is_loop(const OrientedMultigraph& graph, const EdgePath& path);
/// Loop whose edges are all usable in the domain.
bool is_loop_in(const Domain& domain, const EdgePath& path);
/// Throws std::invalid_argument unless `path` is a nonempty loop.
void require_loop(const OrientedMultigraph& graph, const EdgePath& path);

EdgePath rotate(const EdgePath& path, std::size_t k);
/// l̂: the edges in reverse order, each replaced by its ι-image.
EdgePath reverse_path(const EdgePath& path, const ReversalInvolution& iota);

/// Start of the lexicographically least rotation (Booth); the smallest such
/// start when the sequence is periodic.
std::size_t least_rotation(const EdgePath& path);
EdgePath minimal_rotation(const EdgePath& path);
/// J: the largest number of identical blocks the sequence splits into.
int repetition_count(const EdgePath& path);

/// ρ(l) = g^{-n} / n.
Rational rho_mass(const EdgePath& loop, int g);

struct LoopClass {
  EdgePath canonical;
  int J = 1;
  Rational mu;
  int n() const { return static_cast<int>(canonical.size()); }
};

struct UnorientedLoopClass {
  EdgePath canonical;
  int J = 1;
  int J_tilde = 1;
  /// True when the loop and its reversal are the same oriented class.
  bool self_reverse = false;
  Rational nu;
  int n() const { return static_cast<int>(canonical.size()); }
};

LoopClass canonicalize_oriented(const OrientedMultigraph& graph, const EdgePath& loop);
UnorientedLoopClass canonicalize_unoriented(const OrientedMultigraph& graph, const EdgePath& loop,
                                            const ReversalInvolution& iota);
/// Canonical keys only, without validation or masses.
EdgePath oriented_key(const EdgePath& loop);
EdgePath unoriented_key(const EdgePath& loop, const ReversalInvolution& iota);

struct CatalogEntry {
  EdgePath canonical;
  int multiplicity = 1;  // J (oriented) or J̃ (unoriented)
  Rational mass;         // μ or ν
  double mass_d = 0.0;
  /// Oriented classes projecting to this one: itself when oriented, one or
  /// two keys when unoriented.
  std::vector<EdgePath> preimages;
  int n() const { return static_cast<int>(canonical.size()); }
};

struct LoopCatalog {
  Domain domain;
  int L_max = 0;
  Orientation orientation = Orientation::Oriented;
  std::vector<CatalogEntry> classes;
  /// Upper bound on the omitted mass; +inf when the killed walk is recurrent.
  double tail_bound = 0.0;

  std::optional<std::size_t> find(const EdgePath& key) const;
  Rational total_mass() const;
  double total_mass_d() const;

  std::map<EdgePath, std::size_t> index;
};

/// Return false to stop extending a partial loop. Receives the prefix.
using PrunePredicate = std::function<bool(const EdgePath&)>;

struct EnumerationOptions {
  /// Default budget 10^6, overridable with LOOPSOUP_MAX_CLASSES.
  std::size_t max_classes = 0;
  PrunePredicate prune;
  /// Keep only classes for which this returns true (applied to the
  /// canonical oriented representative before unoriented grouping).
  std::function<bool(const EdgePath&)> accept;
};

std::size_t default_class_budget();

/// Every class of length <= L_max whose edges are usable in the domain.
LoopCatalog enumerate_loops(const Domain& domain, int L_max, Orientation orientation,
                            const EnumerationOptions& options = {});

/// Σ_{n > L_max} |D| λ^n / n with λ the spectral radius of P_D.
/// Throws RecurrentDomainError when λ >= 1 - 1e-9.
double tail_bound(const Domain& domain, int L_max);
double tail_bound_for(double lambda, int domain_size, int L_max);

/// One JSON object per line: edges (ids), n, J or J_tilde, mass, mass_float.
void write_catalog_jsonl(std::ostream& out, const LoopCatalog& catalog);

std::vector<int> edge_ids(const OrientedMultigraph& graph, const EdgePath& path);

}  // namespace loopsoup
