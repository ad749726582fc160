#include <doctest.h>

#include <cmath>

#include <abc/taylor.hpp>

using namespace abc;

namespace {

double central_diff(double (*f)(double), double x, double h) { return (f(x + h) - f(x - h)) / (2 * h); }

}  // namespace

TEST_SUITE("taylor") {

TEST_CASE("jet arithmetic matches closed forms") {
  Jet1 x = Jet1::variable(4, 0.3);
  Jet1 sq = x * x;
  CHECK(sq.value() == doctest::Approx(0.09));
  CHECK(sq.deriv(1) == doctest::Approx(0.6));
  CHECK(sq.deriv(2) == doctest::Approx(2.0));
  CHECK(sq.deriv(3) == doctest::Approx(0.0));

  Jet1 e = jet_exp(x);
  for (int m = 0; m <= 4; ++m) CHECK(e.deriv(m) == doctest::Approx(std::exp(0.3)).epsilon(1e-12));

  Jet1 inv = jet_div(Jet1::constant(4, 1.0), x);
  CHECK(inv.value() == doctest::Approx(1.0 / 0.3));
  CHECK(inv.deriv(1) == doctest::Approx(-1.0 / 0.09));
  CHECK(inv.deriv(2) == doctest::Approx(2.0 / 0.027));
}

TEST_CASE("affine jets chain through composition") {
  // rho evaluated on (2x - 1): derivative picks up the factor 2
  Jet1 arg = Jet1::affine(3, 0.2, 2.0);
  Jet1 r = rho_jet(arg);
  CHECK(r.value() == doctest::Approx(rho(0.2)));
  CHECK(r.deriv(1) == doctest::Approx(2.0 * rho_deriv(0.2, 1)).epsilon(1e-10));
}

TEST_CASE("the bump has the exact midpoint values") {
  CHECK(rho(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rho_deriv(0.0, 1) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("the bump is a partition of one") {
  for (double x : {-0.95, -0.7, -0.3, -0.01, 0.0, 0.17, 0.42, 0.8, 0.99}) {
    CHECK(rho(x) + rho(-x) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("the bump is flat at the endpoints") {
  CHECK(rho(-1.0) == 0.0);
  CHECK(rho(1.0) == 1.0);
  for (int m = 1; m <= 4; ++m) {
    CHECK(rho_deriv(-1.0, m) == 0.0);
    CHECK(rho_deriv(1.0, m) == 0.0);
  }
  // and beyond them it saturates
  CHECK(rho(-1.5) == 0.0);
  CHECK(rho(1.5) == 1.0);
  CHECK(rho_deriv(-1.5, 2) == 0.0);
}

TEST_CASE("the bump is monotone") {
  double prev = -1.0;
  for (int i = 0; i <= 40; ++i) {
    double x = -1.0 + 2.0 * i / 40.0;
    double v = rho(x);
    CHECK(v >= prev);
    prev = v;
    if (i > 0 && i < 40) CHECK(rho_deriv(x, 1) >= 0.0);
  }
}

TEST_CASE("bump derivatives agree with finite differences") {
  for (double x : {-0.6, -0.2, 0.1, 0.35, 0.75}) {
    double h = 1e-6;
    double fd1 = central_diff(&rho, x, h);
    CHECK(rho_deriv(x, 1) == doctest::Approx(fd1).epsilon(1e-7));
    double fd2 = (rho(x + h) - 2 * rho(x) + rho(x - h)) / (h * h);
    CHECK(rho_deriv(x, 2) == doctest::Approx(fd2).epsilon(1e-4));
  }
}

TEST_CASE("sigma jets vanish identically on the closed negative axis") {
  Jet1 s = sigma_jet(Jet1::variable(3, -0.25));
  for (int m = 0; m <= 3; ++m) CHECK(s.deriv(m) == 0.0);
  Jet1 z = sigma_jet(Jet1::variable(3, 0.0));
  for (int m = 0; m <= 3; ++m) CHECK(z.deriv(m) == 0.0);
  Jet1 pos = sigma_jet(Jet1::variable(2, 0.5));
  CHECK(pos.value() == doctest::Approx(std::exp(-2.0)));
  CHECK(pos.deriv(1) == doctest::Approx(std::exp(-2.0) * 4.0));  // d/ds exp(-1/s) = exp(-1/s)/s^2
}

}  // TEST_SUITE
