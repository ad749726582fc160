#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include <abc/conjugation.hpp>
#include <abc/errors.hpp>
#include <abc/map_core.hpp>
#include <abc/rational.hpp>
#include <abc/rng.hpp>
#include <abc/scheduler.hpp>

using namespace abc;

namespace {

StageParams toy() { return derive_stage(1, 2, 4, 2, 1, Rational(3, 8), false); }

}  // namespace

TEST_SUITE("map_core") {

TEST_CASE("circle helpers") {
  CHECK(mod1d(1.25) == doctest::Approx(0.25));
  CHECK(mod1d(-0.25) == doctest::Approx(0.75));
  CHECK(circ_diff(0.1, 0.9) == doctest::Approx(0.2));
  CHECK(circ_diff(0.9, 0.1) == doctest::Approx(-0.2));
  CHECK(circ_dist(0.95, 0.05) == doctest::Approx(0.1));
  CHECK(mod1(Rational(-1, 4)) == Rational(3, 4));
  CHECK(mod_centered(Rational(7, 8), Rational(1)) == Rational(-1, 8));
  CHECK(dist_to_int(Rational(9, 4)) == Rational(1, 4));
  CHECK(rfloor(Rational(-7, 2)) == -4);
  CHECK(rceil(Rational(-7, 2)) == -3);
}

TEST_CASE("exact rationals from doubles") {
  Rational r = rational_from_double(0.1);
  CHECK(to_double(r) == 0.1);                 // bit-exact round trip
  CHECK(r != Rational(1, 10));                // 0.1 is not a decimal in binary
  CHECK(parse_rational("17/32") == Rational(17, 32));
  CHECK(parse_rational("-3") == Rational(-3));
  CHECK_THROWS_AS(parse_rational("x/y"), Error);
}

TEST_CASE("integer roots") {
  CHECK(iroot(Int(255), 4) == 3);
  CHECK(iroot(Int(256), 4) == 4);
  CHECK(iroot(Int(257), 4) == 4);
  CHECK(iroot(Int(1) << 60, 2) == Int(1) << 30);
}

TEST_CASE("rotation evaluation") {
  MapExpr R = rotation_map(Rational(17, 32));
  PartialMapResult out = eval_jet(R, TorusPoint{0.25, 0.5});
  CHECK(out.jet.point.theta == doctest::Approx(mod1d(0.25 + 17.0 / 32.0)));
  CHECK(out.jet.point.r == doctest::Approx(0.5));
  CHECK(out.jet.deriv.a == 1.0);
  CHECK(out.jet.deriv.b == 0.0);
  CHECK(out.jet.deriv.c == 0.0);
  CHECK(out.jet.deriv.d == 1.0);

  ExactMapResult ex = eval_exact(R, rat_point(Rational(3, 4), Rational(1, 3)));
  REQUIRE(ex.representable);
  CHECK(ex.point.theta == mod1(Rational(3, 4) + Rational(17, 32)));
  CHECK(ex.point.r == Rational(1, 3));
  CHECK(ex.tag == Tag::GOOD);
}

TEST_CASE("rotation powers wrap exactly") {
  MapExpr R7 = rotation_power(Rational(17, 32), Int(7));
  ExactMapResult ex = eval_exact(R7, rat_point(Rational(0), Rational(0)));
  CHECK(ex.point.theta == mod1(Rational(7 * 17, 32)));

  MapExpr quarter = chain({rotation_map(Rational(1, 4)), rotation_map(Rational(1, 4))});
  ExactMapResult half = eval_exact(quarter, rat_point(Rational(0), Rational(0)));
  CHECK(half.point.theta == Rational(1, 2));
  CHECK(half.tag == Tag::GOOD);
}

TEST_CASE("chains compose left factor first") {
  // factors listed in application order: shear then rotation
  StageParams st = toy();
  MapExpr g = shear_map(st);
  MapExpr R = rotation_map(Rational(1, 2));
  MapExpr c = chain({g, R});
  TorusPoint p{0.1, 0.3};
  PartialMapResult direct = eval_jet(R, eval_jet(g, p).jet.point);
  PartialMapResult chained = eval_jet(c, p);
  CHECK(chained.jet.point.theta == doctest::Approx(direct.jet.point.theta));
  CHECK(chained.jet.point.r == doctest::Approx(direct.jet.point.r));
}

TEST_CASE("inverses round-trip") {
  StageParams st = toy();
  Rng rng{7};
  for (const MapExpr& e : {rotation_map(Rational(17, 32)), shear_map(st), typeA_map(st)}) {
    for (int i = 0; i < 50; ++i) {
      TorusPoint p{rng.uniform(rng.at(i, 0)), rng.uniform(rng.at(i, 1))};
      PartialMapResult fwd = eval_jet(e, p);
      PartialMapResult back = eval_jet_inverse(e, fwd.jet.point);
      CHECK(circ_dist(back.jet.point.theta, p.theta) <= 1e-12);
      CHECK(circ_dist(back.jet.point.r, p.r) <= 1e-12);
      // derivative of the round trip is the identity
      Mat2 prod = back.jet.deriv * fwd.jet.deriv;
      CHECK(prod.a == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(prod.d == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(std::fabs(prod.b) <= 1e-9);
      CHECK(std::fabs(prod.c) <= 1e-9);
    }
  }
}

TEST_CASE("exact and float evaluation agree on rational points") {
  StageParams st = toy();
  MapExpr c = chain({shear_map(st), rotation_map(Rational(17, 32))});
  Rng rng{11};
  int usable = 0;
  for (int i = 0; i < 200; ++i) {
    Rational th = rng.uniform_rational(rng.at(i, 0));
    Rational r = rng.uniform_rational(rng.at(i, 1));
    ExactMapResult ex = eval_exact(c, rat_point(th, r));
    if (!ex.representable) continue;  // a band point shears by a transcendental offset
    ++usable;
    PartialMapResult fl = eval_jet(c, TorusPoint{to_double(th), to_double(r)});
    CHECK(circ_dist(to_double(ex.point.theta), fl.jet.point.theta) <= 1e-13);
    CHECK(circ_dist(to_double(ex.point.r), fl.jet.point.r) <= 1e-13);
    CHECK(ex.tag == fl.tag);
  }
  CHECK(usable >= 190);
}

TEST_CASE("projectivized direction transport") {
  // identity fixes the fiber
  CHECK(projectivize(Mat2::identity(), 0.3) == doctest::Approx(0.3));
  // a rotation by beta advances the fiber by beta/pi
  double t = projectivize(Mat2::rotation(3.14159265358979323846 / 2), 0.9);
  CHECK(t == doctest::Approx(0.4).epsilon(1e-12));
  // the unit shear [[1,1],[0,1]] sends the vertical to the diagonal
  Mat2 shear{1.0, 1.0, 0.0, 1.0};
  CHECK(projectivize(shear, 0.5) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("projective evaluation composes transport with the base map") {
  MapExpr R = rotation_map(Rational(1, 3));
  ProjResult pr = eval_proj(R, ProjPoint{TorusPoint{0.2, 0.7}, 0.15});
  CHECK(pr.p.point.theta == doctest::Approx(mod1d(0.2 + 1.0 / 3.0)));
  CHECK(pr.p.t == doctest::Approx(0.15));  // rotations of the base fix directions
  CHECK(pr.tag == Tag::GOOD);
}

TEST_CASE("transition tags are sticky through chains") {
  StageParams st = toy();
  MapExpr g = shear_map(st);
  // the seam at r = 1/32 sits mid-band between the first two plateaus
  PartialMapResult out = eval_jet(chain({g, rotation_map(Rational(1, 2))}), TorusPoint{0.1, 1.0 / 32.0});
  CHECK(out.tag == Tag::TRANSITION);
}

TEST_CASE("finite-difference jacobian harness flags transition stencils") {
  StageParams st = toy();
  MapExpr g = shear_map(st);
  // plateau interior: analytic and FD derivatives agree tightly
  double err = jacobian_fd_check(g, TorusPoint{0.37, 10.5 / 32.0}, 1e-6);
  CHECK(err <= 1e-9);
  double rot = jacobian_fd_check(rotation_map(Rational(1, 3)), TorusPoint{0.2, 0.6}, 1e-6);
  CHECK(rot <= 1e-9);
  // a stencil inside the band must refuse
  CHECK_THROWS_AS(jacobian_fd_check(g, TorusPoint{0.37, 1.0 / 32.0}, 1e-6), Error);
}

TEST_CASE("fiber shifts combine exactly when both legs are exact") {
  FiberShift a{true, Rational(1, 2)};
  FiberShift b{true, Rational(3, 4)};
  FiberShift c = combine(a, b);
  CHECK(c.exact);
  CHECK(c.shift == Rational(1, 2) + Rational(3, 4));
  FiberShift d = combine(a, FiberShift{false, Rational(0)});
  CHECK_FALSE(d.exact);
}

TEST_CASE("the counter rng is deterministic and scheduling independent") {
  Rng a{123}, b{123};
  for (std::uint64_t i = 0; i < 64; ++i) CHECK(a.bits(i) == b.bits(i));
  // dyadic uniforms are exactly representable both ways
  for (std::uint64_t i = 0; i < 32; ++i) {
    double u = a.uniform(i);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(to_double(a.uniform_rational(i)) == u);
  }
  // distinct seeds decorrelate
  Rng c{124};
  int same = 0;
  for (std::uint64_t i = 0; i < 64; ++i) same += a.bits(i) == c.bits(i);
  CHECK(same == 0);
}

}  // TEST_SUITE
