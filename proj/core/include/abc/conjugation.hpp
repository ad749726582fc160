#pragma once

#include <optional>

#include <abc/map_core.hpp>
#include <abc/partitions.hpp>
#include <abc/scheduler.hpp>
#include <abc/step_profile.hpp>

namespace abc {

// Hamiltonian shear (theta, r) -> (theta + psi(r), r). GOOD on plateaus of
// psi, where it is an exact translation; commutes with every R_t.
MapExpr shear_map(const StepProfile& profile);
MapExpr shear_map(const StageParams& stage);

// Digit-swap translations: on every good ZETA cell, the pure translation
// moving digit pair (u2, v0) to (k^5-v0-1, u2); identity (TRANSITION) in the
// margin gaps. Exact on rationals everywhere.
MapExpr typeA_map(const StageParams& stage);

// Radial block rotations on the 1/rot_cells grid: rotation by beta = s*pi/k
// (s = column index mod k) on the disc of radius R1 about each cell center,
// identity outside R2, smooth monotone angle in between. Exactly
// area-preserving everywhere. outer_is_transition retags the outer identity
// region for use inside phi, where only the rotated disc realizes the
// intended fiber shift.
MapExpr typeB_map(const StageParams& stage, bool outer_is_transition = false);

struct TypeBGeometry {
  Rational w;    // cell width 1/rot_cells
  Rational R1;   // plateau radius (21/50) w
  Rational R2;   // outer radius   (12/25) w
  Int cols;      // rot_cols
  Int cells;     // rot_cells
  Int k;
};
TypeBGeometry typeB_geometry(const StageParams& stage);

// phi = i . phi_tilde on even half-columns [2u0/(2q), (2u0+1)/(2q)), identity
// on odd ones. Both branches preserve the half-column, so the inverse
// dispatches on the same parity.
MapExpr phi_map(const StageParams& stage);

// h = g . phi
MapExpr stage_step(const StageParams& stage);

struct AssembledStage {
  StageParams params;
  MapExpr phi;    // phi_n
  MapExpr h;      // h_n = g_n . phi_n
  MapExpr H;      // H_n = H_{n-1} . h_n
  MapExpr H_inv;  //
  MapExpr f;      // f_n = H_n . R_{alpha_{n+1}} . H_n^{-1}
  MapExpr Phi;    // Phi_n = phi_n . R^{m_n} . phi_n^{-1}
  Rational alpha_next;
  Int q_next, p_next;
  MixingTime mix;
};

// prev = nullptr for stage 1 (H_0 = id). Raises INCONSISTENT_PARAMS when
// alpha_next does not have denominator k*l*q^2.
AssembledStage assemble_stage(const StageParams& stage, const Rational& alpha_next, const MixingTime& mix,
                              const AssembledStage* prev);

// Convenience: full scheduler + assembly chain for stages 1..n at fixed
// (k,l,sigma) per stage entry.
struct StageSpec {
  Int k, l;
};
std::vector<AssembledStage> assemble_chain(const std::vector<StageSpec>& specs, const Int& q1, const Int& p1,
                                           const Rational& sigma);

PartialMapResult shear_eval(const MapExpr& g, const TorusPoint& p);
PartialMapResult typeA_eval(const MapExpr& m, const TorusPoint& p);
PartialMapResult typeB_eval(const MapExpr& m, const TorusPoint& p);

}  // namespace abc
