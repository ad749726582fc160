#include <abc/map_core.hpp>

#include <algorithm>
#include <sstream>

namespace abc {

ExactMapResult MapNode::eval_exact(const RatPoint& p, bool inverse) const {
  PartialMapResult r = eval(to_double(p), inverse);
  return ExactMapResult{false, RatPoint{}, r.tag, FiberShift{false, Rational(0)}};
}

namespace {

class IdentityNode final : public MapNode {
 public:
  PartialMapResult eval(const TorusPoint& p, bool) const override {
    return PartialMapResult{Jet{p, Mat2::identity()}, Tag::GOOD, FiberShift{}};
  }
  ExactMapResult eval_exact(const RatPoint& p, bool) const override {
    return ExactMapResult{true, p, Tag::GOOD, FiberShift{}};
  }
  bool has_exact_inverse() const override { return true; }
  std::string name() const override { return "id"; }
};

class RotationNode final : public MapNode {
 public:
  RotationNode(Rational alpha, std::string label) : alpha_(mod1(std::move(alpha))), label_(std::move(label)) {
    alpha_d_ = to_double(alpha_);
  }

  PartialMapResult eval(const TorusPoint& p, bool inverse) const override {
    double t = inverse ? p.theta - alpha_d_ : p.theta + alpha_d_;
    return PartialMapResult{Jet{TorusPoint{mod1d(t), p.r}, Mat2::identity()}, Tag::GOOD, FiberShift{}};
  }
  ExactMapResult eval_exact(const RatPoint& p, bool inverse) const override {
    Rational t = inverse ? Rational(p.theta - alpha_) : Rational(p.theta + alpha_);
    return ExactMapResult{true, RatPoint{mod1(t), p.r}, Tag::GOOD, FiberShift{}};
  }
  bool has_exact_inverse() const override { return true; }
  std::string name() const override { return label_; }

 private:
  Rational alpha_;
  double alpha_d_;
  std::string label_;
};

class ChainNode final : public MapNode {
 public:
  ChainNode(std::vector<MapExpr> factors, std::string label)
      : factors_(std::move(factors)), label_(std::move(label)) {
    for (const auto& f : factors_) {
      if (!f) raise(ErrorCode::BAD_ARGUMENT, "chain: null factor");
    }
  }

  PartialMapResult eval(const TorusPoint& p, bool inverse) const override {
    PartialMapResult acc{Jet{p, Mat2::identity()}, Tag::GOOD, FiberShift{}};
    auto step = [&](const MapExpr& f) {
      PartialMapResult r = f->eval(acc.jet.point, inverse);
      acc.jet.point = r.jet.point;
      acc.jet.deriv = r.jet.deriv * acc.jet.deriv;
      acc.tag = worse(acc.tag, r.tag);
      acc.fiber = combine(acc.fiber, r.fiber);
    };
    if (inverse) {
      for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) step(*it);
    } else {
      for (const auto& f : factors_) step(f);
    }
    return acc;
  }

  ExactMapResult eval_exact(const RatPoint& p, bool inverse) const override {
    ExactMapResult acc{true, p, Tag::GOOD, FiberShift{}};
    auto step = [&](const MapExpr& f) -> bool {
      ExactMapResult r = f->eval_exact(acc.point, inverse);
      acc.tag = worse(acc.tag, r.tag);
      if (!r.representable) {
        acc.representable = false;
        acc.fiber = FiberShift{false, Rational(0)};
        return false;
      }
      acc.point = r.point;
      acc.fiber = combine(acc.fiber, r.fiber);
      return true;
    };
    if (inverse) {
      for (auto it = factors_.rbegin(); it != factors_.rend(); ++it)
        if (!step(*it)) break;
    } else {
      for (const auto& f : factors_)
        if (!step(f)) break;
    }
    return acc;
  }

  bool has_exact_inverse() const override {
    return std::all_of(factors_.begin(), factors_.end(), [](const MapExpr& f) { return f->has_exact_inverse(); });
  }

  double min_feature_width() const override {
    double w = 1.0;
    for (const auto& f : factors_) w = std::min(w, f->min_feature_width());
    return w;
  }

  double region_clearance(const TorusPoint& p, bool inverse) const override {
    double clr = 1.0;
    TorusPoint cur = p;
    auto step = [&](const MapExpr& f) {
      clr = std::min(clr, f->region_clearance(cur, inverse));
      cur = f->eval(cur, inverse).jet.point;
    };
    if (inverse) {
      for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) step(*it);
    } else {
      for (const auto& f : factors_) step(f);
    }
    return clr;
  }

  std::string name() const override {
    if (!label_.empty()) return label_;
    std::ostringstream os;
    os << "chain(";
    for (size_t i = 0; i < factors_.size(); ++i) {
      if (i) os << ";";
      os << factors_[i]->name();
    }
    os << ")";
    return os.str();
  }

 private:
  std::vector<MapExpr> factors_;
  std::string label_;
};

class InverseNode final : public MapNode {
 public:
  explicit InverseNode(MapExpr base) : base_(std::move(base)) {
    if (!base_) raise(ErrorCode::BAD_ARGUMENT, "inverse_of: null map");
  }

  PartialMapResult eval(const TorusPoint& p, bool inverse) const override { return base_->eval(p, !inverse); }
  ExactMapResult eval_exact(const RatPoint& p, bool inverse) const override {
    return base_->eval_exact(p, !inverse);
  }
  bool has_exact_inverse() const override { return base_->has_exact_inverse(); }
  double min_feature_width() const override { return base_->min_feature_width(); }
  double region_clearance(const TorusPoint& p, bool inverse) const override {
    return base_->region_clearance(p, !inverse);
  }
  std::string name() const override { return "inv(" + base_->name() + ")"; }

  MapExpr base() const { return base_; }

 private:
  MapExpr base_;
};

constexpr double kMinFeature = 9.094947017729282e-13;  // 2^-40

}  // namespace

MapExpr identity_map() {
  static MapExpr id = std::make_shared<IdentityNode>();
  return id;
}

MapExpr rotation_map(const Rational& alpha) {
  return std::make_shared<RotationNode>(alpha, "R(" + to_string(mod1(alpha)) + ")");
}

MapExpr rotation_power(const Rational& alpha, const Int& m) {
  Rational beta = mod1(Rational(m) * alpha);
  std::ostringstream os;
  os << "R^" << m.str() << "(" << to_string(mod1(alpha)) << ")";
  return std::make_shared<RotationNode>(beta, os.str());
}

MapExpr chain(std::vector<MapExpr> factors, std::string label) {
  if (factors.empty()) return identity_map();
  if (factors.size() == 1 && label.empty()) return factors[0];
  return std::make_shared<ChainNode>(std::move(factors), std::move(label));
}

MapExpr inverse_of(MapExpr m) {
  if (auto inv = std::dynamic_pointer_cast<const InverseNode>(m)) return inv->base();
  return std::make_shared<InverseNode>(std::move(m));
}

double min_feature_width(const MapExpr& e) { return e->min_feature_width(); }

double region_clearance(const MapExpr& e, const TorusPoint& p) { return e->region_clearance(p, false); }

static void check_feature_width(const MapExpr& e) {
  if (e->min_feature_width() < kMinFeature)
    raise(ErrorCode::NUMERIC_UNDERFLOW, "map features below 2^-40; double evaluation unreliable: " + e->name());
}

PartialMapResult eval_jet(const MapExpr& e, const TorusPoint& p) {
  check_feature_width(e);
  return e->eval(TorusPoint{mod1d(p.theta), mod1d(p.r)}, false);
}

PartialMapResult eval_jet_inverse(const MapExpr& e, const TorusPoint& p) {
  check_feature_width(e);
  return e->eval(TorusPoint{mod1d(p.theta), mod1d(p.r)}, true);
}

ExactMapResult eval_exact(const MapExpr& e, const RatPoint& p) {
  return e->eval_exact(rat_point(p.theta, p.r), false);
}

ExactMapResult eval_exact_inverse(const MapExpr& e, const RatPoint& p) {
  return e->eval_exact(rat_point(p.theta, p.r), true);
}

double projectivize(const Mat2& deriv, double t) {
  if (std::fabs(deriv.det()) < 1e-12)
    raise(ErrorCode::SINGULAR_DERIV, "projectivized action undefined: |det| < 1e-12");
  double phi = M_PI * t;
  double x = std::cos(phi), y = std::sin(phi);
  double wx = deriv.a * x + deriv.b * y;
  double wy = deriv.c * x + deriv.d * y;
  return mod1d(std::atan2(wy, wx) / M_PI);
}

ProjResult eval_proj(const MapExpr& e, const ProjPoint& p) {
  PartialMapResult r = eval_jet(e, p.point);
  double t;
  if (r.fiber.exact) {
    t = mod1d(p.t + to_double(r.fiber.shift));
  } else {
    t = projectivize(r.jet.deriv, p.t);
  }
  return ProjResult{ProjPoint{r.jet.point, t}, r.jet.deriv, r.tag, r.fiber};
}

double jacobian_fd_check(const MapExpr& e, const TorusPoint& p, double h) {
  if (h <= 0.0) raise(ErrorCode::BAD_ARGUMENT, "jacobian_fd_check: h must be positive");
  check_feature_width(e);

  PartialMapResult c = e->eval(TorusPoint{mod1d(p.theta), mod1d(p.r)}, false);

  // Offsets: +/-h and +/-2h along each axis, order [th+, th-, th+2, th-2, r+, r-, r+2, r-2].
  const double off[4] = {h, -h, 2.0 * h, -2.0 * h};
  PartialMapResult s[8];
  for (int axis = 0; axis < 2; ++axis) {
    for (int i = 0; i < 4; ++i) {
      TorusPoint q = p;
      if (axis == 0)
        q.theta += off[i];
      else
        q.r += off[i];
      s[axis * 4 + i] = e->eval(TorusPoint{mod1d(q.theta), mod1d(q.r)}, false);
    }
  }

  auto consistent = [&](const PartialMapResult& r) {
    if (r.tag != Tag::GOOD || c.tag != Tag::GOOD) return false;
    if (r.fiber.exact != c.fiber.exact) return false;
    if (r.fiber.exact && r.fiber.shift != c.fiber.shift) return false;
    return true;
  };
  for (const auto& r : s) {
    if (!consistent(r))
      raise(ErrorCode::IN_TRANSITION, "jacobian_fd_check: stencil crosses a transition region");
  }

  // 4th-order central differences on circle-lifted displacements.
  auto col = [&](int axis, int comp) {
    auto lift = [&](const PartialMapResult& r) {
      const TorusPoint& q = r.jet.point;
      const TorusPoint& q0 = c.jet.point;
      return comp == 0 ? circ_diff(q.theta, q0.theta) : circ_diff(q.r, q0.r);
    };
    double g1 = lift(s[axis * 4 + 0]);
    double gm1 = lift(s[axis * 4 + 1]);
    double g2 = lift(s[axis * 4 + 2]);
    double gm2 = lift(s[axis * 4 + 3]);
    return (-g2 + 8.0 * g1 - 8.0 * gm1 + gm2) / (12.0 * h);
  };

  double fd[4] = {col(0, 0), col(1, 0), col(0, 1), col(1, 1)};
  double an[4] = {c.jet.deriv.a, c.jet.deriv.b, c.jet.deriv.c, c.jet.deriv.d};
  double err = 0.0;
  for (int i = 0; i < 4; ++i) err = std::max(err, std::fabs(fd[i] - an[i]) / std::max(1.0, std::fabs(an[i])));
  return err;
}

}  // namespace abc
