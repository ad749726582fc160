#include <abc/conjugation.hpp>

#include <cmath>
#include <sstream>

#include <abc/errors.hpp>
#include <abc/taylor.hpp>

namespace abc {

namespace {

class ShearNode final : public MapNode {
 public:
  explicit ShearNode(StepProfile sp) : sp_(std::move(sp)) {}

  PartialMapResult eval(const TorusPoint& p, bool inverse) const override {
    ProfileValue v = profile_value(sp_, p.r);
    double sgn = inverse ? -1.0 : 1.0;
    PartialMapResult out;
    out.jet.point = TorusPoint{mod1d(p.theta + sgn * v.value), p.r};
    out.jet.deriv = Mat2{1.0, sgn * v.deriv, 0.0, 1.0};
    out.tag = v.tag;
    if (v.region == ProfileRegion::BAND) out.fiber = FiberShift{false, Rational(0)};
    return out;
  }

  ExactMapResult eval_exact(const RatPoint& p, bool inverse) const override {
    ProfileValueExact v = profile_value_exact(sp_, p.r);
    ExactMapResult out;
    out.tag = v.tag;
    if (v.region == ProfileRegion::BAND) out.fiber = FiberShift{false, Rational(0)};
    if (!v.representable) {
      out.representable = false;
      return out;
    }
    Rational t = inverse ? Rational(p.theta - v.value) : Rational(p.theta + v.value);
    out.point = RatPoint{mod1(t), p.r};
    return out;
  }

  bool has_exact_inverse() const override { return true; }
  double min_feature_width() const override { return profile_min_feature(sp_); }
  const StepProfile* shear_profile() const override { return &sp_; }

  double region_clearance(const TorusPoint& p, bool) const override {
    double a = to_double(sp_.a);
    double two_eps = 2.0 * to_double(sp_.eps);
    double y = a * mod1d(p.r);
    double near = std::round(y);
    double fd = std::fabs(y - near);
    double dy = (fd < two_eps) ? two_eps - fd : fd - two_eps;
    // the wrap line r=0 separates the two flat collars
    if (fd < two_eps && (near == 0.0 || near == a)) dy = std::min(dy, fd);
    return dy / a;
  }

  std::string name() const override {
    std::ostringstream os;
    os << "g[a=" << sp_.a << ",b=" << sp_.b << ",eps=" << to_string(sp_.eps) << "]";
    return os.str();
  }

 private:
  StepProfile sp_;
};

class TypeANode final : public MapNode {
 public:
  explicit TypeANode(const StageParams& st)
      : parts_(st), k5_(ipow(st.k, 5)), s_u2_(2 * ipow(st.k, 6) * st.q) {}

  PartialMapResult eval(const TorusPoint& p, bool inverse) const override {
    TorusPoint q{mod1d(p.theta), mod1d(p.r)};
    PartialMapResult out;
    out.jet = Jet{q, Mat2::identity()};
    auto cell = parts_.locate(Level::ZETA, q);
    if (!cell) {
      out.tag = Tag::TRANSITION;
      return out;
    }
    auto [dth, dr] = delta(*cell, inverse);
    out.jet.point = TorusPoint{mod1d(q.theta + to_double(dth)), mod1d(q.r + to_double(dr))};
    return out;
  }

  ExactMapResult eval_exact(const RatPoint& p, bool inverse) const override {
    RatPoint q = rat_point(p.theta, p.r);
    ExactMapResult out;
    out.point = q;
    auto cell = parts_.locate(Level::ZETA, q);
    if (!cell) {
      out.tag = Tag::TRANSITION;
      return out;
    }
    auto [dth, dr] = delta(*cell, inverse);
    out.point = RatPoint{mod1(q.theta + dth), mod1(q.r + dr)};
    return out;
  }

  bool has_exact_inverse() const override { return true; }
  double min_feature_width() const override { return to_double(parts_.min_cell_width(Level::ZETA)); }

  double region_clearance(const TorusPoint& p, bool) const override {
    TorusPoint q{mod1d(p.theta), mod1d(p.r)};
    auto cell = parts_.locate(Level::ZETA, q);
    if (!cell) return 0.0;
    CellBox b = parts_.box(*cell);
    double c1 = q.theta - to_double(b.theta_lo);
    double c2 = to_double(b.theta_hi) - q.theta;
    double c3 = q.r - to_double(b.r_lo);
    double c4 = to_double(b.r_hi) - q.r;
    return std::max(0.0, std::min(std::min(c1, c2), std::min(c3, c4)));
  }

  std::string name() const override {
    std::ostringstream os;
    os << "phiT[k=" << parts_.stage().k << ",q=" << parts_.stage().q << "]";
    return os.str();
  }

 private:
  std::pair<Rational, Rational> delta(const CellIndex& c, bool inverse) const {
    if (!inverse) {
      Int U2 = k5_ - c.v0 - 1, V0 = c.u2;
      return {Rational(U2 - c.u2, s_u2_), Rational(V0 - c.v0, k5_)};
    }
    Int u2 = c.v0, v0 = k5_ - c.u2 - 1;
    return {Rational(u2 - c.u2, s_u2_), Rational(v0 - c.v0, k5_)};
  }

  PartitionScheme parts_;
  Int k5_, s_u2_;
};

class TypeBNode final : public MapNode {
 public:
  TypeBNode(const StageParams& st, bool outer_is_transition) : outer_transition_(outer_is_transition) {
    cells_ = st.rot_cells;
    cols_ = st.rot_cols;
    k_ = st.k;
    if (cells_ < 1 || cols_ < 1 || k_ < 1 || cells_ % cols_ != 0)
      raise(ErrorCode::INCONSISTENT_PARAMS, "typeB: rot_cols must divide rot_cells");
    stride_ = cells_ / cols_;
    w_ = Rational(1, cells_);
    R1_ = Rational(21, 50 * cells_);
    R2_ = Rational(12, 25 * cells_);
    if (k_ >= 2 && R2_ > (Rational(1, 2) - st.rot_eps) * w_)
      raise(ErrorCode::INCONSISTENT_PARAMS, "typeB: outer radius exceeds the identity collar");
    fits_ = cells_ <= (Int(1) << 62);
    if (fits_) {
      cells_ll_ = cells_.convert_to<long long>();
      stride_ll_ = stride_.convert_to<long long>();
      k_ll_ = k_.convert_to<long long>();
      w_d_ = to_double(w_);
      R1_d_ = to_double(R1_);
      R2_d_ = to_double(R2_);
    }
  }

  PartialMapResult eval(const TorusPoint& p, bool inverse) const override {
    if (!fits_) raise(ErrorCode::NUMERIC_UNDERFLOW, "typeB grid too fine for float evaluation");
    TorusPoint q{mod1d(p.theta), mod1d(p.r)};
    Local lc = local(q);
    PartialMapResult out;
    out.jet = Jet{q, Mat2::identity()};
    if (lc.s >= R2_d_) {
      out.tag = outer_transition_ ? Tag::TRANSITION : Tag::GOOD;
      return out;
    }
    if (lc.s <= R1_d_) {
      double ang = inverse ? -lc.beta : lc.beta;
      double co = std::cos(ang), si = std::sin(ang);
      out.jet.point = TorusPoint{mod1d(lc.cx + co * lc.dx - si * lc.dy), mod1d(lc.cy + si * lc.dx + co * lc.dy)};
      out.jet.deriv = Mat2{co, -si, si, co};
      out.tag = Tag::GOOD;
      Rational sh(lc.s_idx, k_);
      out.fiber = FiberShift{true, mod1(inverse ? Rational(-sh) : sh)};
      return out;
    }
    double arg = (R1_d_ + R2_d_ - 2.0 * lc.s) / (R2_d_ - R1_d_);
    double omega = lc.beta * rho(arg);
    double domega = lc.beta * rho_deriv(arg, 1) * (-2.0 / (R2_d_ - R1_d_));
    double ang = inverse ? -omega : omega;
    double co = std::cos(ang), si = std::sin(ang);
    out.jet.point = TorusPoint{mod1d(lc.cx + co * lc.dx - si * lc.dy), mod1d(lc.cy + si * lc.dx + co * lc.dy)};
    Mat2 rot{co, -si, si, co};
    if (!inverse) {
      double ux = lc.dx / lc.s, uy = lc.dy / lc.s;
      Mat2 m = radial_term(lc.s * domega, ux, uy, +1.0);
      out.jet.deriv = rot * m;
    } else {
      // direction of the preimage radius
      double ux = (co * lc.dx - si * lc.dy) / lc.s;
      double uy = (si * lc.dx + co * lc.dy) / lc.s;
      Mat2 m = radial_term(lc.s * domega, ux, uy, -1.0);
      out.jet.deriv = m * rot;
    }
    out.tag = Tag::TRANSITION;
    out.fiber = FiberShift{false, Rational(0)};
    return out;
  }

  ExactMapResult eval_exact(const RatPoint& p, bool inverse) const override {
    RatPoint q = rat_point(p.theta, p.r);
    Int i = rfloor(q.theta * Rational(cells_));
    Int j = rfloor(q.r * Rational(cells_));
    Rational cx(2 * i + 1, 2 * cells_), cy(2 * j + 1, 2 * cells_);
    Rational dx = q.theta - cx, dy = q.r - cy;
    Rational S = dx * dx + dy * dy;
    Int s_idx = (i / stride_) % k_;
    ExactMapResult out;
    out.point = q;
    if (S >= R2_ * R2_) {
      out.tag = outer_transition_ ? Tag::TRANSITION : Tag::GOOD;
      return out;
    }
    if (S <= R1_ * R1_) {
      out.tag = Tag::GOOD;
      Rational sh(s_idx, k_);
      out.fiber = FiberShift{true, mod1(inverse ? Rational(-sh) : sh)};
      if (s_idx == 0) return out;
      if (2 * s_idx == k_) {
        // quarter turn has an exact rational form
        bool ccw = !inverse;
        Rational ndx = ccw ? Rational(-dy) : dy;
        Rational ndy = ccw ? dx : -dx;
        out.point = RatPoint{mod1(cx + ndx), mod1(cy + ndy)};
        return out;
      }
      out.representable = false;
      return out;
    }
    out.representable = false;
    out.tag = Tag::TRANSITION;
    out.fiber = FiberShift{false, Rational(0)};
    return out;
  }

  bool has_exact_inverse() const override { return true; }
  double min_feature_width() const override { return to_double(w_) / 50.0; }

  double region_clearance(const TorusPoint& p, bool) const override {
    if (!fits_) return 0.0;
    TorusPoint q{mod1d(p.theta), mod1d(p.r)};
    Local lc = local(q);
    if (lc.s >= R2_d_) {
      double gx = std::min(q.theta - lc.cell_lo_x, lc.cell_lo_x + w_d_ - q.theta);
      double gy = std::min(q.r - lc.cell_lo_y, lc.cell_lo_y + w_d_ - q.r);
      double neighbor = std::min(gx, gy) + (0.5 * w_d_ - R2_d_);
      return std::min(lc.s - R2_d_, neighbor);
    }
    if (lc.s <= R1_d_) return R1_d_ - lc.s;
    return std::min(lc.s - R1_d_, R2_d_ - lc.s);
  }

  std::string name() const override {
    std::ostringstream os;
    os << "i[cells=" << cells_ << ",k=" << k_ << (outer_transition_ ? ",inner" : "") << "]";
    return os.str();
  }

 private:
  struct Local {
    double cx, cy, dx, dy, s, beta;
    double cell_lo_x, cell_lo_y;
    long long s_idx;
  };

  Local local(const TorusPoint& q) const {
    long long i = static_cast<long long>(std::floor(q.theta * static_cast<double>(cells_ll_)));
    long long j = static_cast<long long>(std::floor(q.r * static_cast<double>(cells_ll_)));
    if (i < 0) i = 0;
    if (i >= cells_ll_) i = cells_ll_ - 1;
    if (j < 0) j = 0;
    if (j >= cells_ll_) j = cells_ll_ - 1;
    Local lc;
    lc.cell_lo_x = static_cast<double>(i) * w_d_;
    lc.cell_lo_y = static_cast<double>(j) * w_d_;
    lc.cx = lc.cell_lo_x + 0.5 * w_d_;
    lc.cy = lc.cell_lo_y + 0.5 * w_d_;
    lc.dx = q.theta - lc.cx;
    lc.dy = q.r - lc.cy;
    lc.s = std::hypot(lc.dx, lc.dy);
    lc.s_idx = (i / stride_ll_) % k_ll_;
    lc.beta = M_PI * static_cast<double>(lc.s_idx) / static_cast<double>(k_ll_);
    return lc;
  }

  static Mat2 radial_term(double sdo, double ux, double uy, double sign) {
    // I + sign * s*omega' * J u u^T, with J = [[0,-1],[1,0]]
    return Mat2{1.0 - sign * sdo * uy * ux, -sign * sdo * uy * uy, sign * sdo * ux * ux, 1.0 + sign * sdo * ux * uy};
  }

  bool outer_transition_;
  Int cells_, cols_, k_, stride_;
  Rational w_, R1_, R2_;
  bool fits_ = false;
  long long cells_ll_ = 0, stride_ll_ = 0, k_ll_ = 1;
  double w_d_ = 1.0, R1_d_ = 0.0, R2_d_ = 0.0;
};

class PhiNode final : public MapNode {
 public:
  explicit PhiNode(const StageParams& st)
      : a_(std::make_shared<TypeANode>(st)),
        b_(std::make_shared<TypeBNode>(st, true)),
        two_q_(2 * st.q),
        two_q_d_(to_double(Int(2 * st.q))) {}

  PartialMapResult eval(const TorusPoint& p, bool inverse) const override {
    TorusPoint q{mod1d(p.theta), mod1d(p.r)};
    if (odd_column(q.theta)) return PartialMapResult{Jet{q, Mat2::identity()}, Tag::GOOD, FiberShift{}};
    const MapNode& first = inverse ? static_cast<const MapNode&>(*b_) : *a_;
    const MapNode& second = inverse ? static_cast<const MapNode&>(*a_) : *b_;
    PartialMapResult r1 = first.eval(q, inverse);
    PartialMapResult r2 = second.eval(r1.jet.point, inverse);
    return PartialMapResult{Jet{r2.jet.point, r2.jet.deriv * r1.jet.deriv}, worse(r1.tag, r2.tag),
                            combine(r1.fiber, r2.fiber)};
  }

  ExactMapResult eval_exact(const RatPoint& p, bool inverse) const override {
    RatPoint q = rat_point(p.theta, p.r);
    Int u0 = rfloor(q.theta * Rational(two_q_));
    if ((u0 % 2) != 0) return ExactMapResult{true, q, Tag::GOOD, FiberShift{}};
    const MapNode& first = inverse ? static_cast<const MapNode&>(*b_) : *a_;
    const MapNode& second = inverse ? static_cast<const MapNode&>(*a_) : *b_;
    ExactMapResult r1 = first.eval_exact(q, inverse);
    if (!r1.representable) return ExactMapResult{false, RatPoint{}, r1.tag, FiberShift{false, Rational(0)}};
    ExactMapResult r2 = second.eval_exact(r1.point, inverse);
    return ExactMapResult{r2.representable, r2.point, worse(r1.tag, r2.tag), combine(r1.fiber, r2.fiber)};
  }

  bool has_exact_inverse() const override { return true; }
  double min_feature_width() const override { return std::min(a_->min_feature_width(), b_->min_feature_width()); }

  double region_clearance(const TorusPoint& p, bool inverse) const override {
    TorusPoint q{mod1d(p.theta), mod1d(p.r)};
    double col = q.theta * two_q_d_;
    double parity_dist = std::fabs(col - std::round(col)) / two_q_d_;
    if (odd_column(q.theta)) return parity_dist;
    double clr = parity_dist;
    const MapNode& first = inverse ? static_cast<const MapNode&>(*b_) : *a_;
    const MapNode& second = inverse ? static_cast<const MapNode&>(*a_) : *b_;
    clr = std::min(clr, first.region_clearance(q, inverse));
    clr = std::min(clr, second.region_clearance(first.eval(q, inverse).jet.point, inverse));
    return clr;
  }

  std::string name() const override { return "phi"; }

 private:
  bool odd_column(double theta) const {
    auto u0 = static_cast<long long>(std::floor(theta * two_q_d_));
    return (u0 & 1LL) != 0;
  }

  std::shared_ptr<TypeANode> a_;
  std::shared_ptr<TypeBNode> b_;
  Int two_q_;
  double two_q_d_;
};

}  // namespace

MapExpr shear_map(const StepProfile& profile) { return std::make_shared<ShearNode>(profile); }

MapExpr shear_map(const StageParams& stage) {
  return shear_map(step_profile(stage.shear_a, stage.shear_b, stage.shear_eps));
}

MapExpr typeA_map(const StageParams& stage) { return std::make_shared<TypeANode>(stage); }

MapExpr typeB_map(const StageParams& stage, bool outer_is_transition) {
  return std::make_shared<TypeBNode>(stage, outer_is_transition);
}

TypeBGeometry typeB_geometry(const StageParams& stage) {
  TypeBGeometry g;
  g.w = Rational(1, stage.rot_cells);
  g.R1 = Rational(21, 50 * stage.rot_cells);
  g.R2 = Rational(12, 25 * stage.rot_cells);
  g.cols = stage.rot_cols;
  g.cells = stage.rot_cells;
  g.k = stage.k;
  return g;
}

MapExpr phi_map(const StageParams& stage) { return std::make_shared<PhiNode>(stage); }

MapExpr stage_step(const StageParams& stage) {
  return chain({phi_map(stage), shear_map(stage)}, "h" + std::to_string(stage.n));
}

AssembledStage assemble_stage(const StageParams& stage, const Rational& alpha_next, const MixingTime& mix,
                              const AssembledStage* prev) {
  Rational an = mod1(alpha_next);
  Int q_next = stage.k * stage.l * stage.q * stage.q;
  if (den(an) != q_next)
    raise(ErrorCode::INCONSISTENT_PARAMS,
          "assemble_stage: alpha denominator " + den(an).str() + " != k*l*q^2 = " + q_next.str());
  AssembledStage out;
  out.params = stage;
  out.alpha_next = an;
  out.q_next = q_next;
  out.p_next = num(an);
  out.mix = mix;
  std::string sn = std::to_string(stage.n);
  out.phi = phi_map(stage);
  out.h = chain({out.phi, shear_map(stage)}, "h" + sn);
  out.H = prev ? chain({out.h, prev->H}, "H" + sn) : out.h;
  out.H_inv = inverse_of(out.H);
  out.f = chain({out.H_inv, rotation_map(an), out.H}, "f" + sn);
  out.Phi = chain({inverse_of(out.phi), rotation_power(an, mix.m), out.phi}, "Phi" + sn);
  return out;
}

std::vector<AssembledStage> assemble_chain(const std::vector<StageSpec>& specs, const Int& q1, const Int& p1,
                                           const Rational& sigma) {
  if (specs.empty()) raise(ErrorCode::BAD_ARGUMENT, "assemble_chain: no stages requested");
  std::vector<AssembledStage> out;
  Int q = q1, p = p1;
  for (size_t i = 0; i < specs.size(); ++i) {
    StageParams st = derive_stage(static_cast<int>(i) + 1, specs[i].k, specs[i].l, q, p, sigma, true);
    NextAlpha na = next_alpha(st);
    MixingTime mt = mixing_time(st.q, na.q, na.p);
    out.push_back(assemble_stage(st, na.alpha, mt, out.empty() ? nullptr : &out.back()));
    q = na.q;
    p = na.p;
  }
  return out;
}

PartialMapResult shear_eval(const MapExpr& g, const TorusPoint& p) { return eval_jet(g, p); }
PartialMapResult typeA_eval(const MapExpr& m, const TorusPoint& p) { return eval_jet(m, p); }
PartialMapResult typeB_eval(const MapExpr& m, const TorusPoint& p) { return eval_jet(m, p); }

}  // namespace abc
