#include <abc/step_profile.hpp>

#include <cmath>

#include <abc/errors.hpp>
#include <abc/taylor.hpp>

namespace abc {

StepProfile step_profile(const Int& a, const Int& b, const Rational& eps) {
  if (a < 1) raise(ErrorCode::BAD_ARGUMENT, "step_profile: a must be >= 1");
  if (b < 0) raise(ErrorCode::BAD_ARGUMENT, "step_profile: b must be >= 0");
  if (eps <= 0 || eps >= Rational(1, 4)) raise(ErrorCode::BAD_ARGUMENT, "step_profile: need 0 < eps < 1/4");
  Rational inv_two_eps = Rational(1) / (2 * eps);
  if (den(inv_two_eps) != 1) raise(ErrorCode::BAD_ARGUMENT, "step_profile: 1/(2*eps) must be an integer");
  return StepProfile{a, b, eps};
}

namespace {

struct Classified {
  ProfileRegion region;
  long long index;   // plateau j or band i
  double band_arg;   // (y - i)/(2 eps), only for BAND
};

Classified classify(const StepProfile& sp, double x) {
  double a = to_double(sp.a);
  double two_eps = 2.0 * to_double(sp.eps);
  double y = a * x;
  long long ia = static_cast<long long>(to_double(sp.a));
  long long near = std::llround(y);
  if (near >= 1 && near <= ia - 1 && std::fabs(y - near) < two_eps)
    return Classified{ProfileRegion::BAND, near, (y - near) / two_eps};
  if (y < two_eps) return Classified{ProfileRegion::FLAT_LOW, 0, 0.0};
  if (y > a - two_eps) return Classified{ProfileRegion::FLAT_HIGH, ia - 1, 0.0};
  long long j = static_cast<long long>(std::floor(y));
  if (j < 0) j = 0;
  if (j > ia - 1) j = ia - 1;
  return Classified{ProfileRegion::PLATEAU, j, 0.0};
}

}  // namespace

ProfileValue profile_value(const StepProfile& sp, double x) {
  double a = to_double(sp.a);
  double b = to_double(sp.b);
  double two_eps = 2.0 * to_double(sp.eps);
  Classified c = classify(sp, x);
  ProfileValue out;
  out.region = c.region;
  out.index = c.index;
  out.tag = (c.region == ProfileRegion::PLATEAU) ? Tag::GOOD : Tag::TRANSITION;
  switch (c.region) {
    case ProfileRegion::FLAT_LOW:
      out.value = 0.0;
      break;
    case ProfileRegion::FLAT_HIGH:
      out.value = b * (a - 1.0) / a;
      break;
    case ProfileRegion::PLATEAU:
      out.value = b * static_cast<double>(c.index) / a;
      break;
    case ProfileRegion::BAND:
      out.value = (b / a) * (static_cast<double>(c.index) - 1.0 + rho(c.band_arg));
      out.deriv = (b / two_eps) * rho_deriv(c.band_arg, 1);
      break;
  }
  return out;
}

ProfileValueExact profile_value_exact(const StepProfile& sp, const Rational& x) {
  Rational y = Rational(sp.a) * x;
  Rational two_eps = 2 * sp.eps;
  Int yi = rfloor(y);
  Rational fr = y - Rational(yi);
  Int near = yi;
  Rational d = fr;
  if (fr > Rational(1, 2)) {
    near = yi + 1;
    d = fr - 1;
  }
  ProfileValueExact out;
  if (near >= 1 && near <= sp.a - 1 && rabs(d) < two_eps) {
    out.region = ProfileRegion::BAND;
    out.index = near;
    out.tag = Tag::TRANSITION;
    if (d == 0) {
      out.representable = true;
      out.value = Rational(sp.b * (2 * near - 1), 2 * sp.a);
    } else {
      out.representable = false;
    }
    return out;
  }
  out.tag = Tag::TRANSITION;
  if (y < two_eps) {
    out.region = ProfileRegion::FLAT_LOW;
    out.index = 0;
    out.value = Rational(0);
    return out;
  }
  if (y > Rational(sp.a) - two_eps) {
    out.region = ProfileRegion::FLAT_HIGH;
    out.index = sp.a - 1;
    out.value = Rational(sp.b * (sp.a - 1), sp.a);
    return out;
  }
  Int j = yi;
  if (j < 0) j = 0;
  if (j > sp.a - 1) j = sp.a - 1;
  out.region = ProfileRegion::PLATEAU;
  out.index = j;
  out.tag = Tag::GOOD;
  out.value = Rational(sp.b * j, sp.a);
  return out;
}

double profile_deriv(const StepProfile& sp, double x, int m) {
  if (m < 1) raise(ErrorCode::BAD_ARGUMENT, "profile_deriv: order must be >= 1");
  Classified c = classify(sp, x);
  if (c.region != ProfileRegion::BAND) return 0.0;
  double a = to_double(sp.a);
  double b = to_double(sp.b);
  double two_eps = 2.0 * to_double(sp.eps);
  return (b / a) * std::pow(a / two_eps, m) * rho_deriv(c.band_arg, m);
}

double step_profile_eval(const StepProfile& sp, double x) { return profile_value(sp, x).value; }

double profile_min_feature(const StepProfile& sp) { return to_double(Rational(2 * num(sp.eps), den(sp.eps) * sp.a)); }

Rational plateau_lo(const StepProfile& sp, const Int& j) { return (Rational(j) + 2 * sp.eps) / Rational(sp.a); }
Rational plateau_hi(const StepProfile& sp, const Int& j) { return (Rational(j) + 1 - 2 * sp.eps) / Rational(sp.a); }

}  // namespace abc
