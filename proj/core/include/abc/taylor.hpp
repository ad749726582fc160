#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <abc/errors.hpp>

namespace abc {

// Truncated Taylor expansion around a point: c[i] = f^(i)(x0) / i!.
// Order is fixed per expression; mixing orders is a programming error.
struct Jet1 {
  std::vector<double> c;

  Jet1() : c(1, 0.0) {}
  explicit Jet1(int order, double value = 0.0) : c(static_cast<size_t>(order) + 1, 0.0) { c[0] = value; }

  static Jet1 variable(int order, double x0) {
    Jet1 j(order, x0);
    if (order >= 1) j.c[1] = 1.0;
    return j;
  }
  static Jet1 constant(int order, double v) { return Jet1(order, v); }
  // value + slope * dx, the jet of an affine reparametrization
  static Jet1 affine(int order, double value, double slope) {
    Jet1 j(order, value);
    if (order >= 1) j.c[1] = slope;
    return j;
  }

  int order() const { return static_cast<int>(c.size()) - 1; }
  double value() const { return c[0]; }
  // f^(m)(x0)
  double deriv(int m) const;
};

Jet1 operator+(const Jet1& a, const Jet1& b);
Jet1 operator-(const Jet1& a, const Jet1& b);
Jet1 operator*(const Jet1& a, const Jet1& b);
Jet1 operator*(double s, const Jet1& a);
Jet1 operator+(const Jet1& a, double s);
Jet1 operator-(double s, const Jet1& a);

Jet1 jet_div(const Jet1& a, const Jet1& b);  // requires b.c[0] != 0
Jet1 jet_exp(const Jet1& a);

// sigma(s) = exp(-1/s) for s > 0, identically 0 for s <= 0 (all derivatives vanish).
Jet1 sigma_jet(const Jet1& s);

// Smooth step: rho = sigma((x+1)/2) / (sigma((x+1)/2) + sigma((1-x)/2)).
// 0 on (-inf,-1], 1 on [1,inf), rho(0) = 1/2, rho'(0) = 1, rho(x) + rho(-x) = 1.
Jet1 rho_jet(const Jet1& x);
double rho(double x);
double rho_deriv(double x, int m);

}  // namespace abc
