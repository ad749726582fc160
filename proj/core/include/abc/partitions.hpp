#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include <abc/map_core.hpp>
#include <abc/rational.hpp>
#include <abc/scheduler.hpp>

namespace abc {

// Partial partitions of the torus at stage n, coarse to fine:
//   ETA        checkerboard cells with digits (u0,u1,u2; v0)
//   ZETA       refinement with digits (u0..u4; v0,v1,v2)
//   TILDE_ETA  regroupment of good ZETA cells by (u0, v0)
//   HAT_ETA    TILDE_ETA elements crossed with fiber intervals T_j
// Margins leave gaps between cells, so membership can return no cell.
enum class Level { ETA, ZETA, TILDE_ETA, HAT_ETA };

std::string to_string(Level level);

struct CellIndex {
  Level level = Level::ETA;
  Int u0, u1, u2, u3, u4;  // theta digits; ETA uses u0..u2, TILDE/HAT only u0
  Int v0, v1, v2;          // r digits; ETA and TILDE/HAT use v0 only
  Int j;                   // fiber index, HAT_ETA only

  bool operator==(const CellIndex& o) const;
};

std::string to_string(const CellIndex& c);

// Closed rational box. For TILDE_ETA / HAT_ETA this is the hull of the
// member ZETA cells, not a solid cell.
struct CellBox {
  Rational theta_lo, theta_hi;
  Rational r_lo, r_hi;
  Rational t_lo, t_hi;  // HAT_ETA only
  bool has_fiber = false;

  Rational area() const { return (theta_hi - theta_lo) * (r_hi - r_lo); }
  bool contains(const Rational& theta, const Rational& r) const {
    return theta >= theta_lo && theta <= theta_hi && r >= r_lo && r <= r_hi;
  }
};

struct CoverageReport {
  Level level = Level::ETA;
  Int cell_count;
  Rational total_measure;
  Rational bound;  // the coverage floor the construction promises
  bool satisfied = false;
  std::string note;
};

class PartitionScheme {
 public:
  explicit PartitionScheme(StageParams stage);

  const StageParams& stage() const { return stage_; }

  Int count(Level level) const;
  // ETA/ZETA: the (common) area of one cell. TILDE_ETA/HAT_ETA: the exact
  // measure of one element as a union of ZETA cells.
  Rational cell_area(Level level) const;
  CellBox box(const CellIndex& c) const;
  CoverageReport coverage(Level level) const;

  // Exact measure of one piece (fixed u0,u1,v0; union over the free digits).
  Rational tilde_piece_measure() const;

  // Hull box of one piece: theta spans the fixed u1 sub-column, r spans the
  // element's v0 block.
  CellBox piece_hull(const Int& u0, const Int& u1, const Int& v0) const;

  // Exact measure of the union of ZETA cells inside the window. The window
  // must be aligned: theta bounds on the 1/(2kq) grid, r bounds on the 1/k^5
  // grid, so no cell straddles an edge.
  Rational zeta_good_measure(const Rational& theta_lo, const Rational& theta_hi, const Rational& r_lo,
                             const Rational& r_hi) const;

  // diam^2 of any cell is bounded by 2/k^10 (ETA) resp. 2/(k^30 q^2) (ZETA)
  Rational diameter_sq_bound(Level level) const;
  Rational max_diameter_sq(Level level) const;
  bool diameter_within_bound(Level level) const;

  // narrowest geometric feature (for the float-mode underflow guard)
  Rational min_cell_width(Level level) const;

  // Unique cell containing the point, or nullopt when it falls in a margin
  // gap. Exact arithmetic throughout; the TorusPoint overload converts the
  // doubles exactly and additionally treats a 2^-48 collar around every
  // boundary as gap.
  std::optional<CellIndex> locate(Level level, const RatPoint& p) const;
  std::optional<CellIndex> locate(Level level, const TorusPoint& p) const;
  std::optional<CellIndex> locate_proj(const RatPoint& p, const Rational& t) const;
  std::optional<CellIndex> locate_proj(const ProjPoint& p) const;

  // Enumerates all cells in lexicographic index order; stop early by
  // returning false from fn.
  void for_each(Level level, const std::function<bool(const CellIndex&, const CellBox&)>& fn) const;

  void write_csv(std::ostream& os, Level level) const;

 private:
  StageParams stage_;
  Int k5_, two_q_;
  Int s_u1_, s_u2_, s_u3_, s_u4_;  // theta digit scales 2kq, 2k^6q, 2k^11q, 2k^16q
  Int s_v1_, s_v2_;                // r digit scales 2k^11q, 2k^16q
  Rational margin_eta_theta_;      // 1/(4 n^5 k^16 q)
  Rational margin_eta_r_;          // 1/(2 n^5 k^15)
  Rational margin_zeta_;           // 1/(4 n^5 k^26 q), both axes
};

}  // namespace abc
