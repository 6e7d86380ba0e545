#include "loopsoup/green.hpp"

#include <cmath>
#include <stdexcept>

namespace loopsoup {

Eigen::MatrixXd killed_transition(const Domain& domain) {
  const int n = domain.size();
  const double inv_g = 1.0 / domain.g();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (EdgeIndex e : domain.graph().out_edges(domain.vertices()[static_cast<std::size_t>(i)])) {
      if (domain.edge_usable(e)) p(i, domain.local(domain.graph().head(e))) += inv_g;
    }
  }
  return p;
}

std::vector<Rational> killed_transition_exact(const Domain& domain) {
  const int n = domain.size();
  const Rational inv_g(1, domain.g());
  std::vector<Rational> p(static_cast<std::size_t>(n * n), Rational(0));
  for (int i = 0; i < n; ++i) {
    for (EdgeIndex e : domain.graph().out_edges(domain.vertices()[static_cast<std::size_t>(i)])) {
      if (domain.edge_usable(e)) {
        p[static_cast<std::size_t>(i * n + domain.local(domain.graph().head(e)))] += inv_g;
      }
    }
  }
  return p;
}

double spectral_radius(const Domain& domain) {
  const Eigen::MatrixXd p = killed_transition(domain);
  const int n = domain.size();
  const Eigen::MatrixXd lazy = 0.5 * (Eigen::MatrixXd::Identity(n, n) + p);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  double estimate = 0.0;
  // Norm growth converges to the lazy radius (1 + rho) / 2; the lazy step
  // keeps periodic blocks from oscillating.
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd w = lazy * v;
    const double norm = w.lpNorm<Eigen::Infinity>();
    if (norm == 0.0) return 0.0;
    const double next = norm / v.lpNorm<Eigen::Infinity>();
    v = w / norm;
    if (it > 20 && std::abs(next - estimate) < 1e-14) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return std::max(0.0, 2.0 * estimate - 1.0);
}

GreenMatrix::GreenMatrix(std::vector<VertexId> vertices, std::vector<int> local,
                         Eigen::MatrixXd values, std::optional<std::vector<Rational>> exact)
    : vertices_(std::move(vertices)),
      local_(std::move(local)),
      values_(std::move(values)),
      exact_(std::move(exact)) {}

double GreenMatrix::operator()(VertexId x, VertexId y) const {
  const int i = local(x);
  const int j = local(y);
  if (i < 0 || j < 0) return 0.0;
  return values_(i, j);
}

Rational GreenMatrix::exact(VertexId x, VertexId y) const {
  if (!exact_) throw std::logic_error("Green function was computed without exact arithmetic");
  const int i = local(x);
  const int j = local(y);
  if (i < 0 || j < 0) return Rational(0);
  return (*exact_)[static_cast<std::size_t>(i * size() + j)];
}

std::vector<Rational> invert_exact(std::vector<Rational> a, int n) {
  const auto at = [n](int r, int c) { return static_cast<std::size_t>(r * n + c); };
  std::vector<Rational> inv(static_cast<std::size_t>(n * n), Rational(0));
  for (int i = 0; i < n; ++i) inv[at(i, i)] = 1;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    while (pivot < n && a[at(pivot, col)] == 0) ++pivot;
    if (pivot == n) throw RecurrentDomainError("singular matrix in exact inversion");
    if (pivot != col) {
      for (int c = 0; c < n; ++c) {
        std::swap(a[at(pivot, c)], a[at(col, c)]);
        std::swap(inv[at(pivot, c)], inv[at(col, c)]);
      }
    }
    const Rational scale = 1 / a[at(col, col)];
    for (int c = 0; c < n; ++c) {
      a[at(col, c)] *= scale;
      inv[at(col, c)] *= scale;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col || a[at(r, col)] == 0) continue;
      const Rational f = a[at(r, col)];
      for (int c = 0; c < n; ++c) {
        a[at(r, c)] -= f * a[at(col, c)];
        inv[at(r, c)] -= f * inv[at(col, c)];
      }
    }
  }
  return inv;
}

GreenMatrix green_function(const Domain& domain, bool exact) {
  const int n = domain.size();
  const double rho = spectral_radius(domain);
  if (rho > 1.0 - kRecurrenceMargin) {
    throw RecurrentDomainError("killed walk is recurrent on this domain (spectral radius " +
                               std::to_string(rho) + ")");
  }
  std::vector<int> local(static_cast<std::size_t>(domain.graph().vertex_count()), -1);
  for (int i = 0; i < n; ++i) local[static_cast<std::size_t>(domain.vertices()[static_cast<std::size_t>(i)])] = i;

  std::optional<std::vector<Rational>> exact_values;
  Eigen::MatrixXd values(n, n);
  if (exact) {
    if (n > kMaxExactDomain) {
      throw std::invalid_argument("exact Green function needs |D| <= " +
                                  std::to_string(kMaxExactDomain));
    }
    auto a = killed_transition_exact(domain);
    for (auto& q : a) q = -q;
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i * n + i)] += 1;
    exact_values = invert_exact(std::move(a), n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) values(i, j) = (*exact_values)[static_cast<std::size_t>(i * n + j)].get_d();
    }
  } else {
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - killed_transition(domain);
    values = a.partialPivLu().solve(Eigen::MatrixXd::Identity(n, n));
  }
  return GreenMatrix(domain.vertices(), std::move(local), std::move(values), std::move(exact_values));
}

}  // namespace loopsoup
