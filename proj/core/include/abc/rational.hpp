#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "abc/errors.hpp"

namespace abc {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Int num(const Rational& r) { return boost::multiprecision::numerator(r); }
inline Int den(const Rational& r) { return boost::multiprecision::denominator(r); }

inline Rational rat(long long n, long long d = 1) { return Rational(Int(n), Int(d)); }
inline Rational rat(const Int& n, const Int& d = Int(1)) { return Rational(n, d); }

inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline double to_double(const Int& i) { return i.convert_to<double>(); }

inline Int ipow(Int base, unsigned exp) {
  Int out = 1;
  while (exp) {
    if (exp & 1u) out *= base;
    base *= base;
    exp >>= 1u;
  }
  return out;
}

inline Int pow2(unsigned exp) { return Int(1) << exp; }

inline Rational rpow(const Rational& base, unsigned exp) {
  return Rational(ipow(num(base), exp), ipow(den(base), exp));
}

// floor as exact integer
inline Int rfloor(const Rational& r) {
  Int n = num(r), d = den(r);
  Int q = n / d;
  if (n < 0 && q * d != n) --q;
  return q;
}

inline Int rceil(const Rational& r) { return -rfloor(-r); }

// fractional part in [0,1)
inline Rational frac(const Rational& r) { return r - Rational(rfloor(r)); }

// representative of r mod 1 in [0,1)
inline Rational mod1(const Rational& r) { return frac(r); }

// representative of r mod m in [-m/2, m/2)
inline Rational mod_centered(const Rational& r, const Rational& m) {
  Rational t = r / m;
  Int s = rfloor(t + rat(1, 2));
  return r - Rational(s) * m;
}

inline Rational rabs(const Rational& r) { return r < 0 ? Rational(-r) : r; }

// distance from x to the nearest integer
inline Rational dist_to_int(const Rational& x) {
  Rational f = frac(x);
  return f <= rat(1, 2) ? f : Rational(1 - f);
}

// "num/den", always with explicit denominator
inline std::string to_string(const Rational& r) {
  return num(r).str() + "/" + den(r).str();
}

inline Rational parse_rational(std::string_view s) {
  auto bad = [&] { raise(ErrorCode::BAD_ARGUMENT, "cannot parse rational '" + std::string(s) + "'"); };
  if (s.empty()) bad();
  auto slash = s.find('/');
  try {
    if (slash == std::string_view::npos) return Rational(Int(std::string(s)));
    Int n{std::string(s.substr(0, slash))};
    Int d{std::string(s.substr(slash + 1))};
    if (d <= 0) bad();
    return Rational(n, d);
  } catch (const std::exception&) {
    bad();
  }
  return Rational(0);
}

// exact value of a finite double (doubles are dyadic rationals)
inline Rational rational_from_double(double x) {
  if (!std::isfinite(x)) raise(ErrorCode::BAD_ARGUMENT, "rational_from_double: non-finite input");
  if (x == 0.0) return Rational(0);
  int e = 0;
  double m = std::frexp(x, &e);  // x = m * 2^e, |m| in [1/2, 1)
  auto mant = static_cast<long long>(std::ldexp(m, 53));
  Rational out{Int(mant)};
  int shift = e - 53;
  if (shift >= 0)
    out *= Rational(pow2(static_cast<unsigned>(shift)));
  else
    out /= Rational(pow2(static_cast<unsigned>(-shift)));
  return out;
}

// integer t-th root: largest B >= 0 with B^t <= N (N >= 0, t >= 1)
inline Int iroot(const Int& N, unsigned t) {
  if (N < 0) raise(ErrorCode::BAD_ARGUMENT, "iroot of negative");
  if (t == 0) raise(ErrorCode::BAD_ARGUMENT, "iroot order 0");
  if (N <= 1 || t == 1) return N;
  // Newton iteration from an over-estimate, monotone decreasing
  unsigned bits = static_cast<unsigned>(boost::multiprecision::msb(N)) + 1;
  Int x = Int(1) << (bits / t + 1);
  while (true) {
    Int xt1 = ipow(x, t - 1);
    Int y = ((t - 1) * x * xt1 + N) / (t * xt1);
    if (y >= x) break;
    x = y;
  }
  while (ipow(x, t) > N) --x;
  while (ipow(x + 1, t) <= N) ++x;
  return x;
}

}  // namespace abc
