#include <abc/partitions.hpp>

#include <cmath>
#include <ostream>
#include <sstream>

#include <abc/errors.hpp>

namespace abc {

std::string to_string(Level level) {
  switch (level) {
    case Level::ETA: return "eta";
    case Level::ZETA: return "zeta";
    case Level::TILDE_ETA: return "tilde_eta";
    case Level::HAT_ETA: return "hat_eta";
  }
  return "?";
}

bool CellIndex::operator==(const CellIndex& o) const {
  return level == o.level && u0 == o.u0 && u1 == o.u1 && u2 == o.u2 && u3 == o.u3 && u4 == o.u4 &&
         v0 == o.v0 && v1 == o.v1 && v2 == o.v2 && j == o.j;
}

std::string to_string(const CellIndex& c) {
  std::ostringstream os;
  os << to_string(c.level) << "(" << c.u0 << "," << c.u1 << "," << c.u2 << "," << c.u3 << "," << c.u4 << ";"
     << c.v0 << "," << c.v1 << "," << c.v2;
  if (c.level == Level::HAT_ETA) os << ";" << c.j;
  os << ")";
  return os.str();
}

PartitionScheme::PartitionScheme(StageParams stage) : stage_(std::move(stage)) {
  const Int& k = stage_.k;
  const Int& q = stage_.q;
  if (k < 1 || q < 1 || stage_.n < 1) raise(ErrorCode::BAD_ARGUMENT, "partitions: need k,q,n >= 1");
  k5_ = ipow(k, 5);
  two_q_ = 2 * q;
  s_u1_ = 2 * k * q;
  s_u2_ = 2 * ipow(k, 6) * q;
  s_u3_ = 2 * ipow(k, 11) * q;
  s_u4_ = 2 * ipow(k, 16) * q;
  s_v1_ = s_u3_;
  s_v2_ = s_u4_;
  Int n5 = ipow(Int(stage_.n), 5);
  margin_eta_theta_ = Rational(1, 4 * n5 * ipow(k, 16) * q);
  margin_eta_r_ = Rational(1, 2 * n5 * ipow(k, 15));
  margin_zeta_ = Rational(1, 4 * n5 * ipow(k, 26) * q);
}

Int PartitionScheme::count(Level level) const {
  Int d = k5_ - 2;  // digits u2..u4, v0, v2 range over [1, k^5-2]
  Int v1_count = 2 * ipow(stage_.k, 6) * stage_.q - 4 * stage_.q;
  if (d < 1 || v1_count < 1) return Int(0);
  switch (level) {
    case Level::ETA: return two_q_ * stage_.k * d * d;
    case Level::ZETA: return two_q_ * stage_.k * ipow(d, 5) * v1_count;
    case Level::TILDE_ETA: return two_q_ * d;
    case Level::HAT_ETA: return two_q_ * d * stage_.k;
  }
  return Int(0);
}

Rational PartitionScheme::cell_area(Level level) const {
  switch (level) {
    case Level::ETA: {
      Rational tw = Rational(1, s_u2_) - 2 * margin_eta_theta_;
      Rational rw = Rational(1, k5_) - 2 * margin_eta_r_;
      return tw * rw;
    }
    case Level::ZETA: {
      Rational w = Rational(1, s_u4_) - 2 * margin_zeta_;
      return w * w;
    }
    case Level::TILDE_ETA:
      return Rational(stage_.k) * tilde_piece_measure();
    case Level::HAT_ETA:
      return tilde_piece_measure();  // k pieces x fiber length 1/k
  }
  return Rational(0);
}

Rational PartitionScheme::tilde_piece_measure() const {
  Int d = k5_ - 2;
  Int v1_count = 2 * ipow(stage_.k, 6) * stage_.q - 4 * stage_.q;
  if (d < 1 || v1_count < 1) return Rational(0);
  return Rational(ipow(d, 4) * v1_count) * cell_area(Level::ZETA);
}

CellBox PartitionScheme::piece_hull(const Int& u0, const Int& u1, const Int& v0) const {
  Int d = k5_ - 2;
  auto in = [](const Int& x, const Int& lo, const Int& hi) { return x >= lo && x <= hi; };
  if (!in(u0, 0, two_q_ - 1) || !in(u1, 0, stage_.k - 1) || !in(v0, 1, d))
    raise(ErrorCode::BAD_ARGUMENT, "piece_hull: index out of range");
  Int v1_hi = 2 * ipow(stage_.k, 6) * stage_.q - 2 * stage_.q - 1;
  Rational base = Rational(u0, two_q_) + Rational(u1, s_u1_);
  CellBox b;
  b.theta_lo = base + Rational(1, s_u2_) + Rational(1, s_u3_) + Rational(1, s_u4_) + margin_zeta_;
  b.theta_hi = base + Rational(d, s_u2_) + Rational(d, s_u3_) + Rational(d + 1, s_u4_) - margin_zeta_;
  b.r_lo = Rational(v0, k5_) + Rational(2 * stage_.q, s_v1_) + Rational(1, s_v2_) + margin_zeta_;
  b.r_hi = Rational(v0, k5_) + Rational(v1_hi, s_v1_) + Rational(d + 1, s_v2_) - margin_zeta_;
  return b;
}

Rational PartitionScheme::zeta_good_measure(const Rational& theta_lo, const Rational& theta_hi, const Rational& r_lo,
                                            const Rational& r_hi) const {
  Rational tg = Rational(2 * stage_.k * stage_.q);
  auto aligned = [](const Rational& x, const Rational& g) {
    Rational s = x * g;
    return den(s) == 1;
  };
  if (!aligned(theta_lo, tg) || !aligned(theta_hi, tg))
    raise(ErrorCode::BAD_ARGUMENT, "zeta_good_measure: theta bounds must sit on the 1/(2kq) grid");
  if (!aligned(r_lo, Rational(k5_)) || !aligned(r_hi, Rational(k5_)))
    raise(ErrorCode::BAD_ARGUMENT, "zeta_good_measure: r bounds must sit on the 1/k^5 grid");
  if (theta_hi <= theta_lo || r_hi <= r_lo) return Rational(0);
  if (theta_hi - theta_lo > 1 || r_hi > 1 || r_lo < 0)
    raise(ErrorCode::BAD_ARGUMENT, "zeta_good_measure: window exceeds the fundamental domain");
  Int d = k5_ - 2;
  Int v1_count = 2 * ipow(stage_.k, 6) * stage_.q - 4 * stage_.q;
  if (d < 1 || v1_count < 1) return Rational(0);
  // Per theta sub-column (width 1/(2kq)): good theta-extent of the zeta grid.
  Rational cell_w = Rational(1, s_u4_) - 2 * margin_zeta_;
  Rational theta_per_block = Rational(ipow(d, 3)) * cell_w;
  Int theta_blocks = num((theta_hi - theta_lo) * tg);
  // Per r block (height 1/k^5 at an admissible v0): good r-extent.
  Rational cell_h = Rational(1, s_v2_) - 2 * margin_zeta_;
  Rational r_per_block = Rational(v1_count * d) * cell_h;
  Int v0_lo = num(r_lo * Rational(k5_));
  Int v0_hi = num(r_hi * Rational(k5_));  // exclusive
  if (v0_lo < 1) v0_lo = 1;
  if (v0_hi > d + 1) v0_hi = d + 1;
  if (v0_hi <= v0_lo) return Rational(0);
  Int r_blocks = v0_hi - v0_lo;
  return Rational(theta_blocks) * theta_per_block * Rational(r_blocks) * r_per_block;
}

CellBox PartitionScheme::box(const CellIndex& c) const {
  Int d = k5_ - 2;
  auto in = [](const Int& x, const Int& lo, const Int& hi) { return x >= lo && x <= hi; };
  auto need = [&](bool ok) {
    if (!ok) raise(ErrorCode::BAD_ARGUMENT, "box: index out of range: " + to_string(c));
  };
  need(in(c.u0, 0, two_q_ - 1));
  CellBox b;
  switch (c.level) {
    case Level::ETA: {
      need(in(c.u1, 0, stage_.k - 1) && in(c.u2, 1, d) && in(c.v0, 1, d));
      Rational base = Rational(c.u0, two_q_) + Rational(c.u1, s_u1_);
      b.theta_lo = base + Rational(c.u2, s_u2_) + margin_eta_theta_;
      b.theta_hi = base + Rational(c.u2 + 1, s_u2_) - margin_eta_theta_;
      b.r_lo = Rational(c.v0, k5_) + margin_eta_r_;
      b.r_hi = Rational(c.v0 + 1, k5_) - margin_eta_r_;
      break;
    }
    case Level::ZETA: {
      Int v1_hi = 2 * ipow(stage_.k, 6) * stage_.q - 2 * stage_.q - 1;
      need(in(c.u1, 0, stage_.k - 1) && in(c.u2, 1, d) && in(c.u3, 1, d) && in(c.u4, 1, d) &&
           in(c.v0, 1, d) && in(c.v1, 2 * stage_.q, v1_hi) && in(c.v2, 1, d));
      Rational base = Rational(c.u0, two_q_) + Rational(c.u1, s_u1_) + Rational(c.u2, s_u2_) + Rational(c.u3, s_u3_);
      b.theta_lo = base + Rational(c.u4, s_u4_) + margin_zeta_;
      b.theta_hi = base + Rational(c.u4 + 1, s_u4_) - margin_zeta_;
      Rational rbase = Rational(c.v0, k5_) + Rational(c.v1, s_v1_);
      b.r_lo = rbase + Rational(c.v2, s_v2_) + margin_zeta_;
      b.r_hi = rbase + Rational(c.v2 + 1, s_v2_) - margin_zeta_;
      break;
    }
    case Level::TILDE_ETA:
    case Level::HAT_ETA: {
      need(in(c.v0, 1, d));
      Int v1_hi = 2 * ipow(stage_.k, 6) * stage_.q - 2 * stage_.q - 1;
      // hull over u1 in [0,k), u2,u3 in [1,d], u4 in [1,d], v1, v2 in range
      b.theta_lo = Rational(c.u0, two_q_) + Rational(1, s_u2_) + Rational(1, s_u3_) + Rational(1, s_u4_) + margin_zeta_;
      b.theta_hi = Rational(c.u0, two_q_) + Rational(stage_.k - 1, s_u1_) + Rational(d, s_u2_) + Rational(d, s_u3_) +
                   Rational(d + 1, s_u4_) - margin_zeta_;
      b.r_lo = Rational(c.v0, k5_) + Rational(2 * stage_.q, s_v1_) + Rational(1, s_v2_) + margin_zeta_;
      b.r_hi = Rational(c.v0, k5_) + Rational(v1_hi, s_v1_) + Rational(d + 1, s_v2_) - margin_zeta_;
      if (c.level == Level::HAT_ETA) {
        need(in(c.j, 0, stage_.k - 1));
        b.t_lo = Rational(c.j, stage_.k);
        b.t_hi = Rational(c.j + 1, stage_.k);
        b.has_fiber = true;
      }
      break;
    }
  }
  return b;
}

CoverageReport PartitionScheme::coverage(Level level) const {
  CoverageReport rep;
  rep.level = level;
  rep.cell_count = count(level);
  Rational k5r(k5_);
  switch (level) {
    case Level::ETA: rep.bound = 1 - Rational(8) / k5r; break;
    case Level::ZETA: rep.bound = 1 - Rational(16) / k5r; break;
    case Level::TILDE_ETA: rep.bound = 1 - Rational(25) / k5r; break;
    case Level::HAT_ETA: rep.bound = 1 - Rational(50) / k5r; break;
  }
  if (rep.cell_count == 0) {
    rep.total_measure = Rational(0);
    rep.satisfied = false;
    rep.note = "partition is empty at these parameters";
    return rep;
  }
  rep.total_measure = Rational(rep.cell_count) * cell_area(level);
  rep.satisfied = rep.total_measure >= rep.bound;
  if (rep.bound <= 0) rep.note = "bound is vacuous (non-positive) at this k";
  return rep;
}

Rational PartitionScheme::diameter_sq_bound(Level level) const {
  switch (level) {
    case Level::ETA: return Rational(2, ipow(stage_.k, 10));
    case Level::ZETA: return Rational(2, ipow(stage_.k, 30) * stage_.q * stage_.q);
    case Level::TILDE_ETA:
    case Level::HAT_ETA:
      // hull fits inside one (1/2q) x (1/k^5) rectangle
      return Rational(1, 4 * stage_.q * stage_.q) + Rational(1, ipow(stage_.k, 10));
  }
  return Rational(0);
}

Rational PartitionScheme::max_diameter_sq(Level level) const {
  if (count(level) == 0) return Rational(0);
  CellIndex c;
  c.level = level;
  c.u0 = 0;
  c.u1 = 0;
  c.u2 = c.u3 = c.u4 = 1;
  c.v0 = c.v2 = 1;
  c.v1 = 2 * stage_.q;
  c.j = 0;
  if (level == Level::ETA || level == Level::TILDE_ETA || level == Level::HAT_ETA) {
    c.u3 = c.u4 = 0;
    c.v1 = 0;
    c.v2 = 0;
    if (level != Level::ETA) c.u1 = 0, c.u2 = 0;
  }
  CellBox b = box(c);
  Rational tw = b.theta_hi - b.theta_lo;
  Rational rw = b.r_hi - b.r_lo;
  return tw * tw + rw * rw;  // all cells of a level are congruent (hulls too)
}

bool PartitionScheme::diameter_within_bound(Level level) const {
  if (count(level) == 0) return true;
  return max_diameter_sq(level) <= diameter_sq_bound(level);
}

Rational PartitionScheme::min_cell_width(Level level) const {
  switch (level) {
    case Level::ETA: {
      Rational tw = Rational(1, s_u2_) - 2 * margin_eta_theta_;
      Rational rw = Rational(1, k5_) - 2 * margin_eta_r_;
      Rational m = 2 * margin_eta_theta_;
      Rational mr = 2 * margin_eta_r_;
      Rational out = tw;
      if (rw < out) out = rw;
      if (m < out) out = m;
      if (mr < out) out = mr;
      return out;
    }
    default: {
      Rational w = Rational(1, s_u4_) - 2 * margin_zeta_;
      Rational m = 2 * margin_zeta_;
      return m < w ? m : w;
    }
  }
}

namespace {

struct DigitCut {
  Int digit;
  Rational rem;  // offset past the digit boundary, in [0, 1/scale)
};

DigitCut cut(const Rational& x, const Int& scale) {
  Int d = rfloor(x * Rational(scale));
  return DigitCut{d, x - Rational(d, scale)};
}

}  // namespace

std::optional<CellIndex> PartitionScheme::locate(Level level, const RatPoint& p) const {
  Int d = k5_ - 2;
  if (d < 1) return std::nullopt;
  Rational x = mod1(p.theta);
  Rational r = mod1(p.r);

  CellIndex c;
  c.level = level;
  DigitCut t0 = cut(x, two_q_);
  c.u0 = t0.digit;
  DigitCut t1 = cut(t0.rem, s_u1_);
  c.u1 = t1.digit;
  DigitCut t2 = cut(t1.rem, s_u2_);
  c.u2 = t2.digit;
  if (c.u2 < 1 || c.u2 > d) return std::nullopt;

  DigitCut r0 = cut(r, k5_);
  c.v0 = r0.digit;
  if (c.v0 < 1 || c.v0 > d) return std::nullopt;

  if (level == Level::ETA) {
    if (t2.rem < margin_eta_theta_ || t2.rem > Rational(1, s_u2_) - margin_eta_theta_) return std::nullopt;
    if (r0.rem < margin_eta_r_ || r0.rem > Rational(1, k5_) - margin_eta_r_) return std::nullopt;
    c.u3 = c.u4 = c.v1 = c.v2 = c.j = 0;
    return c;
  }

  DigitCut t3 = cut(t2.rem, s_u3_);
  c.u3 = t3.digit;
  if (c.u3 < 1 || c.u3 > d) return std::nullopt;
  DigitCut t4 = cut(t3.rem, s_u4_);
  c.u4 = t4.digit;
  if (c.u4 < 1 || c.u4 > d) return std::nullopt;
  if (t4.rem < margin_zeta_ || t4.rem > Rational(1, s_u4_) - margin_zeta_) return std::nullopt;

  DigitCut r1 = cut(r0.rem, s_v1_);
  c.v1 = r1.digit;
  if (c.v1 < 2 * stage_.q || c.v1 > 2 * ipow(stage_.k, 6) * stage_.q - 2 * stage_.q - 1) return std::nullopt;
  DigitCut r2 = cut(r1.rem, s_v2_);
  c.v2 = r2.digit;
  if (c.v2 < 1 || c.v2 > d) return std::nullopt;
  if (r2.rem < margin_zeta_ || r2.rem > Rational(1, s_v2_) - margin_zeta_) return std::nullopt;

  if (level == Level::ZETA) {
    c.j = 0;
    return c;
  }
  // TILDE_ETA / HAT_ETA membership is membership in any good ZETA cell with
  // the same (u0, v0); keep only the element digits.
  CellIndex e;
  e.level = level;
  e.u0 = c.u0;
  e.v0 = c.v0;
  e.u1 = e.u2 = e.u3 = e.u4 = e.v1 = e.v2 = e.j = 0;
  return e;
}

std::optional<CellIndex> PartitionScheme::locate(Level level, const TorusPoint& p) const {
  if (to_double(min_cell_width(level)) < std::ldexp(1.0, -40))
    raise(ErrorCode::NUMERIC_UNDERFLOW, "partition features below 2^-40; use exact coordinates");
  RatPoint rp{rational_from_double(mod1d(p.theta)), rational_from_double(mod1d(p.r))};
  Level probe = (level == Level::ETA) ? Level::ETA : Level::ZETA;
  auto fine = locate(probe, rp);
  if (!fine) return std::nullopt;
  CellBox b = box(*fine);
  Rational g(Int(1), pow2(48));
  if (rp.theta < b.theta_lo + g || rp.theta > b.theta_hi - g) return std::nullopt;
  if (rp.r < b.r_lo + g || rp.r > b.r_hi - g) return std::nullopt;
  if (level == Level::ETA || level == Level::ZETA) return fine;
  CellIndex e;
  e.level = level;
  e.u0 = fine->u0;
  e.v0 = fine->v0;
  e.u1 = e.u2 = e.u3 = e.u4 = e.v1 = e.v2 = e.j = 0;
  return e;
}

std::optional<CellIndex> PartitionScheme::locate_proj(const RatPoint& p, const Rational& t) const {
  auto e = locate(Level::HAT_ETA, p);
  if (!e) return std::nullopt;
  e->j = rfloor(mod1(t) * Rational(stage_.k));
  return e;
}

std::optional<CellIndex> PartitionScheme::locate_proj(const ProjPoint& p) const {
  auto e = locate(Level::HAT_ETA, p.point);
  if (!e) return std::nullopt;
  Rational t = rational_from_double(mod1d(p.t));
  Int j = rfloor(t * Rational(stage_.k));
  Rational g(Int(1), pow2(48));
  if (t - Rational(j, stage_.k) < g || Rational(j + 1, stage_.k) - t < g) return std::nullopt;
  e->j = j;
  return e;
}

void PartitionScheme::for_each(Level level, const std::function<bool(const CellIndex&, const CellBox&)>& fn) const {
  Int d = k5_ - 2;
  if (d < 1) return;
  Int v1_lo = 2 * stage_.q;
  Int v1_hi = 2 * ipow(stage_.k, 6) * stage_.q - 2 * stage_.q - 1;
  if (v1_hi < v1_lo) return;

  CellIndex c;
  c.level = level;
  c.u1 = c.u2 = c.u3 = c.u4 = c.v1 = c.v2 = c.j = 0;

  switch (level) {
    case Level::ETA:
      for (c.u0 = 0; c.u0 < two_q_; ++c.u0)
        for (c.u1 = 0; c.u1 < stage_.k; ++c.u1)
          for (c.u2 = 1; c.u2 <= d; ++c.u2)
            for (c.v0 = 1; c.v0 <= d; ++c.v0)
              if (!fn(c, box(c))) return;
      return;
    case Level::ZETA:
      for (c.u0 = 0; c.u0 < two_q_; ++c.u0)
        for (c.u1 = 0; c.u1 < stage_.k; ++c.u1)
          for (c.u2 = 1; c.u2 <= d; ++c.u2)
            for (c.u3 = 1; c.u3 <= d; ++c.u3)
              for (c.u4 = 1; c.u4 <= d; ++c.u4)
                for (c.v0 = 1; c.v0 <= d; ++c.v0)
                  for (c.v1 = v1_lo; c.v1 <= v1_hi; ++c.v1)
                    for (c.v2 = 1; c.v2 <= d; ++c.v2)
                      if (!fn(c, box(c))) return;
      return;
    case Level::TILDE_ETA:
      for (c.u0 = 0; c.u0 < two_q_; ++c.u0)
        for (c.v0 = 1; c.v0 <= d; ++c.v0)
          if (!fn(c, box(c))) return;
      return;
    case Level::HAT_ETA:
      for (c.u0 = 0; c.u0 < two_q_; ++c.u0)
        for (c.v0 = 1; c.v0 <= d; ++c.v0)
          for (c.j = 0; c.j < stage_.k; ++c.j)
            if (!fn(c, box(c))) return;
      return;
  }
}

void PartitionScheme::write_csv(std::ostream& os, Level level) const {
  os << "level,u0,u1,u2,u3,u4,v0,v1,v2,j,theta_lo,theta_hi,r_lo,r_hi,t_lo,t_hi\n";
  for_each(level, [&](const CellIndex& c, const CellBox& b) {
    os << to_string(level) << "," << c.u0 << "," << c.u1 << "," << c.u2 << "," << c.u3 << "," << c.u4 << ","
       << c.v0 << "," << c.v1 << "," << c.v2 << "," << c.j << "," << to_string(b.theta_lo) << ","
       << to_string(b.theta_hi) << "," << to_string(b.r_lo) << "," << to_string(b.r_hi);
    if (b.has_fiber)
      os << "," << to_string(b.t_lo) << "," << to_string(b.t_hi) << "\n";
    else
      os << ",,\n";
    return true;
  });
}

}  // namespace abc
