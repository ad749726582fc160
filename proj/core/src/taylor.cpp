#include <abc/taylor.hpp>

namespace abc {

namespace {

double factorial(int m) {
  double f = 1.0;
  for (int i = 2; i <= m; ++i) f *= i;
  return f;
}

}  // namespace

double Jet1::deriv(int m) const {
  if (m < 0 || m > order()) raise(ErrorCode::BAD_ARGUMENT, "jet derivative order out of range");
  return c[static_cast<size_t>(m)] * factorial(m);
}

Jet1 operator+(const Jet1& a, const Jet1& b) {
  Jet1 r(a.order());
  for (size_t i = 0; i < r.c.size(); ++i) r.c[i] = a.c[i] + b.c[i];
  return r;
}

Jet1 operator-(const Jet1& a, const Jet1& b) {
  Jet1 r(a.order());
  for (size_t i = 0; i < r.c.size(); ++i) r.c[i] = a.c[i] - b.c[i];
  return r;
}

Jet1 operator*(const Jet1& a, const Jet1& b) {
  Jet1 r(a.order());
  for (size_t i = 0; i < r.c.size(); ++i) {
    double s = 0.0;
    for (size_t j = 0; j <= i; ++j) s += a.c[j] * b.c[i - j];
    r.c[i] = s;
  }
  return r;
}

Jet1 operator*(double s, const Jet1& a) {
  Jet1 r = a;
  for (double& x : r.c) x *= s;
  return r;
}

Jet1 operator+(const Jet1& a, double s) {
  Jet1 r = a;
  r.c[0] += s;
  return r;
}

Jet1 operator-(double s, const Jet1& a) {
  Jet1 r(a.order(), s);
  for (size_t i = 0; i < r.c.size(); ++i) r.c[i] -= a.c[i];
  return r;
}

Jet1 jet_div(const Jet1& a, const Jet1& b) {
  if (b.c[0] == 0.0) raise(ErrorCode::BAD_ARGUMENT, "jet division by zero constant term");
  Jet1 q(a.order());
  for (size_t i = 0; i < q.c.size(); ++i) {
    double s = a.c[i];
    for (size_t j = 0; j < i; ++j) s -= q.c[j] * b.c[i - j];
    q.c[i] = s / b.c[0];
  }
  return q;
}

Jet1 jet_exp(const Jet1& a) {
  Jet1 e(a.order());
  e.c[0] = std::exp(a.c[0]);
  for (size_t i = 1; i < e.c.size(); ++i) {
    double s = 0.0;
    for (size_t j = 1; j <= i; ++j) s += static_cast<double>(j) * a.c[j] * e.c[i - j];
    e.c[i] = s / static_cast<double>(i);
  }
  return e;
}

Jet1 sigma_jet(const Jet1& s) {
  if (s.c[0] <= 0.0) return Jet1(s.order(), 0.0);
  Jet1 minus_inv = jet_div(Jet1(s.order(), -1.0), s);
  return jet_exp(minus_inv);
}

Jet1 rho_jet(const Jet1& x) {
  if (x.c[0] <= -1.0) return Jet1(x.order(), 0.0);
  if (x.c[0] >= 1.0) return Jet1(x.order(), 1.0);
  Jet1 a = sigma_jet(0.5 * (x + 1.0));
  Jet1 b = sigma_jet(0.5 * (1.0 - x));
  return jet_div(a, a + b);
}

double rho(double x) { return rho_jet(Jet1::variable(0, x)).value(); }

double rho_deriv(double x, int m) { return rho_jet(Jet1::variable(m, x)).deriv(m); }

}  // namespace abc
