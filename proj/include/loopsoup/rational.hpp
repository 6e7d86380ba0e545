#pragma once

#include <gmpxx.h>

#include <string>

namespace loopsoup {

/// Exact rational scalar used by the oracle (exact) code paths.
using Rational = mpq_class;

inline double to_double(const Rational& q) { return q.get_d(); }
inline double to_double(double x) { return x; }

/// "p/q" (or "p" when the denominator is one).
std::string to_string(const Rational& q);

/// base^n for n >= 0.
Rational pow_int(const Rational& base, unsigned n);

/// 1 / g^n, the weight of a path with n steps on a g-regular graph.
Rational inverse_power(unsigned g, unsigned n);

/// Converts between the two scalar kinds used by templated engines.
template <class Scalar>
Scalar from_rational(const Rational& q);

template <>
inline Rational from_rational<Rational>(const Rational& q) { return q; }

template <>
inline double from_rational<double>(const Rational& q) { return q.get_d(); }

inline Rational abs(const Rational& q) { return q < 0 ? Rational(-q) : q; }

}  // namespace loopsoup
