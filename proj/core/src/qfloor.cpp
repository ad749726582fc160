#include "abc/scheduler.hpp"

#include <gmp.h>
#include <mpfr.h>

#include <cstdlib>

#include "abc/errors.hpp"

namespace abc {
namespace {

// n^t * q^s compared against B^t decides floor(n q^(s/t)) exactly
int cmp_power(const Int& B, const Int& n, const Int& q, unsigned s, unsigned t) {
  Int lhs = ipow(B, t);
  Int rhs = ipow(n, t) * ipow(q, s);
  if (lhs < rhs) return -1;
  if (lhs > rhs) return 1;
  return 0;
}

void set_from_int(mpfr_t x, const Int& v, mpfr_rnd_t rnd) {
  mpfr_set_str(x, v.str().c_str(), 10, rnd);
}

}  // namespace

Int floor_n_q_sigma(const Int& n, const Int& q, const Rational& sigma) {
  if (n < 1 || q < 1) raise(ErrorCode::BAD_ARGUMENT, "floor_n_q_sigma needs n,q >= 1");
  if (q == 1) return n;
  Int s_i = num(sigma), t_i = den(sigma);
  if (s_i <= 0) raise(ErrorCode::BAD_ARGUMENT, "sigma must be positive");
  unsigned s = s_i.convert_to<unsigned>();
  unsigned t = t_i.convert_to<unsigned>();

  for (mpfr_prec_t prec = 128;; prec *= 2) {
    mpfr_t lo, hi, nn;
    mpfr_inits2(prec, lo, hi, nn, static_cast<mpfr_ptr>(nullptr));

    // lower bound: every operation rounded down
    set_from_int(lo, q, MPFR_RNDD);
    mpfr_log(lo, lo, MPFR_RNDD);
    mpfr_mul_ui(lo, lo, s, MPFR_RNDD);
    mpfr_div_ui(lo, lo, t, MPFR_RNDD);
    mpfr_exp(lo, lo, MPFR_RNDD);
    set_from_int(nn, n, MPFR_RNDD);
    mpfr_mul(lo, lo, nn, MPFR_RNDD);

    // upper bound: rounded up
    set_from_int(hi, q, MPFR_RNDU);
    mpfr_log(hi, hi, MPFR_RNDU);
    mpfr_mul_ui(hi, hi, s, MPFR_RNDU);
    mpfr_div_ui(hi, hi, t, MPFR_RNDU);
    mpfr_exp(hi, hi, MPFR_RNDU);
    set_from_int(nn, n, MPFR_RNDU);
    mpfr_mul(hi, hi, nn, MPFR_RNDU);

    mpz_t za, zb;
    mpz_init(za);
    mpz_init(zb);
    mpfr_get_z(za, lo, MPFR_RNDD);  // exact floor into an arbitrary-precision target
    mpfr_get_z(zb, hi, MPFR_RNDD);
    char* slo = mpz_get_str(nullptr, 10, za);
    char* shi = mpz_get_str(nullptr, 10, zb);
    Int a(slo), b(shi);
    free(slo);
    free(shi);
    mpz_clear(za);
    mpz_clear(zb);
    mpfr_clears(lo, hi, nn, static_cast<mpfr_ptr>(nullptr));

    if (a == b) return a;
    if (b == a + 1) {
      // the interval straddles the single integer b; decide exactly
      int c = cmp_power(b, n, q, s, t);
      return c <= 0 ? b : a;
    }
    if (prec > 1 << 20) raise(ErrorCode::NUMERIC_UNDERFLOW, "floor_n_q_sigma failed to converge");
  }
}

}  // namespace abc
