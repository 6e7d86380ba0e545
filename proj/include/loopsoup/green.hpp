#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "loopsoup/graph.hpp"
#include "loopsoup/rational.hpp"

namespace loopsoup {

class RecurrentDomainError : public GraphError {
 public:
  using GraphError::GraphError;
};

/// Largest domain for which exact rational Green functions are computed.
inline constexpr int kMaxExactDomain = 12;
/// Domains with spectral radius above 1 - kRecurrenceMargin are rejected.
inline constexpr double kRecurrenceMargin = 1e-9;

/// P_D(x, y) = #{usable edges x -> y} / g in the domain's local vertex order.
Eigen::MatrixXd killed_transition(const Domain& domain);
/// Same in exact arithmetic, row-major.
std::vector<Rational> killed_transition_exact(const Domain& domain);

/// Spectral radius of P_D. P_D is nonnegative, so the estimate uses power
/// iteration on (I + P_D) / 2, which is primitive on each irreducible block.
double spectral_radius(const Domain& domain);

/// G_D = (I - P_D)^{-1} restricted to D, zero outside.
class GreenMatrix {
 public:
  GreenMatrix(std::vector<VertexId> vertices, std::vector<int> local, Eigen::MatrixXd values,
              std::optional<std::vector<Rational>> exact);

  int size() const { return static_cast<int>(vertices_.size()); }
  const std::vector<VertexId>& vertices() const { return vertices_; }
  const Eigen::MatrixXd& matrix() const { return values_; }
  bool has_exact() const { return exact_.has_value(); }

  double operator()(VertexId x, VertexId y) const;
  /// Exact entry; zero outside D. Throws std::logic_error without exact data.
  Rational exact(VertexId x, VertexId y) const;
  /// Exact entry when available, else the double converted to Rational.
  template <class Scalar>
  Scalar at(VertexId x, VertexId y) const;

 private:
  int local(VertexId v) const {
    return v >= 0 && v < static_cast<int>(local_.size()) ? local_[static_cast<std::size_t>(v)] : -1;
  }

  std::vector<VertexId> vertices_;
  std::vector<int> local_;
  Eigen::MatrixXd values_;
  std::optional<std::vector<Rational>> exact_;
};

template <>
inline double GreenMatrix::at<double>(VertexId x, VertexId y) const { return (*this)(x, y); }
template <>
inline Rational GreenMatrix::at<Rational>(VertexId x, VertexId y) const { return exact(x, y); }

/// Throws RecurrentDomainError when the spectral radius is too close to one.
/// `exact` requires |D| <= kMaxExactDomain.
GreenMatrix green_function(const Domain& domain, bool exact = false);

/// Inverse of a square rational matrix (row-major) by Gauss-Jordan.
std::vector<Rational> invert_exact(std::vector<Rational> a, int n);

}  // namespace loopsoup
