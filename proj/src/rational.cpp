#include "loopsoup/rational.hpp"

namespace loopsoup {

std::string to_string(const Rational& q) {
  Rational c = q;
  c.canonicalize();
  return c.get_str();
}

Rational pow_int(const Rational& base, unsigned n) {
  mpz_class num, den;
  mpz_pow_ui(num.get_mpz_t(), base.get_num_mpz_t(), n);
  mpz_pow_ui(den.get_mpz_t(), base.get_den_mpz_t(), n);
  Rational out(num, den);
  out.canonicalize();
  return out;
}

Rational inverse_power(unsigned g, unsigned n) {
  mpz_class den;
  mpz_ui_pow_ui(den.get_mpz_t(), g, n);
  return Rational(mpz_class(1), den);
}

}  // namespace loopsoup
