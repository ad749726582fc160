#pragma once

#include <abc/map_core.hpp>
#include <abc/rational.hpp>

namespace abc {

// Smooth staircase psi_{a,b,eps}(x) = (b/a) * sum_{i=1}^{a-1} rho((a*x - i)/(2*eps))
// on [0,1]: flat collars at both ends, a plateaus of exact value b*j/a, and
// a-1 smooth climbing bands of half-width 2*eps/a between them.
struct StepProfile {
  Int a;
  Int b;
  Rational eps;
};

// Validates a >= 1, b >= 0, 0 < eps < 1/4, 1/(2*eps) integral.
StepProfile step_profile(const Int& a, const Int& b, const Rational& eps);

enum class ProfileRegion { FLAT_LOW, PLATEAU, BAND, FLAT_HIGH };

struct ProfileValue {
  double value = 0.0;
  double deriv = 0.0;
  ProfileRegion region = ProfileRegion::PLATEAU;
  long long index = 0;  // plateau j (also for flats: 0 / a-1), or band i
  Tag tag = Tag::GOOD;
};

struct ProfileValueExact {
  bool representable = true;
  Rational value;
  ProfileRegion region = ProfileRegion::PLATEAU;
  Int index = Int(0);
  Tag tag = Tag::GOOD;
};

ProfileValue profile_value(const StepProfile& sp, double x);
ProfileValueExact profile_value_exact(const StepProfile& sp, const Rational& x);

// m-th derivative, m >= 1. Zero outside bands; (b/a)*(a/(2 eps))^m * rho^(m) inside.
double profile_deriv(const StepProfile& sp, double x, int m);

double step_profile_eval(const StepProfile& sp, double x);

// Narrowest feature: the flat seam collars of width 2*eps/a.
double profile_min_feature(const StepProfile& sp);

// Plateau j as exact bounds [ (j+2eps)/a, (j+1-2eps)/a ].
Rational plateau_lo(const StepProfile& sp, const Int& j);
Rational plateau_hi(const StepProfile& sp, const Int& j);

}  // namespace abc
