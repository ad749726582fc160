#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <abc/errors.hpp>
#include <abc/rational.hpp>

namespace abc {

// Representative in [0,1).
inline double mod1d(double x) {
  double y = x - std::floor(x);
  if (y >= 1.0) y -= 1.0;
  if (y < 0.0) y = 0.0;
  return y;
}

// Shortest signed representative of a - b on the circle, in [-1/2, 1/2).
inline double circ_diff(double a, double b) {
  double d = a - b;
  d -= std::floor(d + 0.5);
  return d;
}

inline double circ_dist(double a, double b) { return std::fabs(circ_diff(a, b)); }

struct TorusPoint {
  double theta = 0.0;
  double r = 0.0;
};

struct RatPoint {
  Rational theta;
  Rational r;
};

inline RatPoint rat_point(const Rational& theta, const Rational& r) { return RatPoint{mod1(theta), mod1(r)}; }
inline TorusPoint to_double(const RatPoint& p) { return TorusPoint{to_double(p.theta), to_double(p.r)}; }

struct Mat2 {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;  // [[a,b],[c,d]]

  static Mat2 identity() { return Mat2{}; }
  static Mat2 rotation(double angle) {
    double co = std::cos(angle), si = std::sin(angle);
    return Mat2{co, -si, si, co};
  }
  double det() const { return a * d - b * c; }
  Mat2 inverse() const {
    double dt = det();
    return Mat2{d / dt, -b / dt, -c / dt, a / dt};
  }
  Mat2 transpose() const { return Mat2{a, c, b, d}; }
};

inline Mat2 operator*(const Mat2& x, const Mat2& y) {
  return Mat2{x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

struct Jet {
  TorusPoint point;
  Mat2 deriv;
};

struct ProjPoint {
  TorusPoint point;
  double t = 0.0;  // tangent direction as t = phi/pi, in [0,1)
};

enum class Tag { GOOD, TRANSITION };

inline Tag worse(Tag x, Tag y) { return (x == Tag::TRANSITION || y == Tag::TRANSITION) ? Tag::TRANSITION : Tag::GOOD; }

// Tracks whether the accumulated derivative is exactly a rotation by pi*shift
// (identity and exact translations count as shift 0). While exact, the fiber
// coordinate moves by precisely `shift`, which keeps tangent-interval
// bookkeeping integer-exact.
struct FiberShift {
  bool exact = true;
  Rational shift = Rational(0);
};

inline FiberShift combine(const FiberShift& x, const FiberShift& y) {
  if (!x.exact || !y.exact) return FiberShift{false, Rational(0)};
  return FiberShift{true, mod1(x.shift + y.shift)};
}

struct PartialMapResult {
  Jet jet;
  Tag tag = Tag::GOOD;
  FiberShift fiber;
};

// Exact evaluation on rational inputs. representable=false means the image
// point involves values outside Q (e.g. a plateau rotation by pi*s/k); the
// tag and fiber data are still meaningful in that case.
struct ExactMapResult {
  bool representable = true;
  RatPoint point;
  Tag tag = Tag::GOOD;
  FiberShift fiber;
};

struct StepProfile;

class MapNode {
 public:
  virtual ~MapNode() = default;
  virtual PartialMapResult eval(const TorusPoint& p, bool inverse) const = 0;
  virtual ExactMapResult eval_exact(const RatPoint& p, bool inverse) const;
  virtual bool has_exact_inverse() const = 0;
  // Smallest geometric feature (cell width, collar width) the map resolves;
  // used for the float-mode underflow guard. Featureless maps return 1.
  virtual double min_feature_width() const { return 1.0; }
  // Distance from p to the nearest boundary of the map's classification
  // regions, walked through composition legs; keeps finite-difference
  // stencils inside one smooth branch. Featureless maps return 1.
  virtual double region_clearance(const TorusPoint& p, bool inverse) const {
    (void)p;
    (void)inverse;
    return 1.0;
  }
  // Non-null iff this node is a plain shear, exposing its profile so norm
  // estimation can use the closed-form derivative bounds.
  virtual const StepProfile* shear_profile() const { return nullptr; }
  virtual std::string name() const = 0;
};

using MapExpr = std::shared_ptr<const MapNode>;

MapExpr identity_map();
MapExpr rotation_map(const Rational& alpha);
// R_alpha iterated m times, collapsed to a single exact rotation by m*alpha mod 1.
MapExpr rotation_power(const Rational& alpha, const Int& m);
// Composition; factors listed in application order (factors[0] acts first).
MapExpr chain(std::vector<MapExpr> factors, std::string label = "");
MapExpr inverse_of(MapExpr m);

double min_feature_width(const MapExpr& e);
double region_clearance(const MapExpr& e, const TorusPoint& p);

PartialMapResult eval_jet(const MapExpr& e, const TorusPoint& p);
PartialMapResult eval_jet_inverse(const MapExpr& e, const TorusPoint& p);
ExactMapResult eval_exact(const MapExpr& e, const RatPoint& p);
ExactMapResult eval_exact_inverse(const MapExpr& e, const RatPoint& p);

// Action of a nonsingular matrix on the projectivized fiber coordinate.
double projectivize(const Mat2& deriv, double t);

struct ProjResult {
  ProjPoint p;
  Mat2 deriv;
  Tag tag = Tag::GOOD;
  FiberShift fiber;
};

ProjResult eval_proj(const MapExpr& e, const ProjPoint& p);

// Max over matrix entries of |fd - analytic| / max(1, |analytic|) with central
// differences of step h. Raises IN_TRANSITION unless the whole 9-point stencil
// evaluates GOOD with a consistent fiber classification.
double jacobian_fd_check(const MapExpr& e, const TorusPoint& p, double h);

}  // namespace abc
