#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <abc/conjugation.hpp>
#include <abc/map_core.hpp>
#include <abc/partitions.hpp>
#include <abc/scheduler.hpp>
#include <abc/step_profile.hpp>

namespace abc {

// Worker count for sampling loops: ABC_WORKERS env override, else hardware
// concurrency. Results never depend on it: counters are assigned by global
// sample index and partial results merge in fixed chunk order.
int workers_from_env();

// max |log singular value|: the deviation from isometry of a single matrix.
// Raises SINGULAR_DERIV on a (numerically) singular input.
double matrix_deviation(const Mat2& m);

struct DeviationReport {
  CellIndex cell;
  double dev = 0.0;
  long long samples = 0;
  long long good_samples = 0;
  double good_fraction = 0.0;
  int angles = 0;
  std::uint64_t seed = 0;
};

// Max over GOOD sampled points of the cell and over `angles` unit directions
// (spread over a half turn) of |log ||J v|||. Raises NO_GOOD_SAMPLES when
// every sample lands in a transition region.
DeviationReport deviation(const PartitionScheme& parts, const MapExpr& expr, const CellIndex& cell,
                          long long samples, int angles, std::uint64_t seed);

// Pullback of the flat metric under H^{-1}: J^T J for J = d(H^{-1}) at p.
// Raises TRANSITION_AT_POINT unless the evaluation is GOOD.
Mat2 pullback_metric(const MapExpr& H, const TorusPoint& p);

struct DistributionReport {
  CellIndex element;  // fibered element index (u0, v0, j)
  int n = 1;
  double gamma = 0.0;
  double delta = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  Rational gamma_target, delta_target, eps1_target, eps2_target;
  double shift_law_fraction = 0.0;
  double transition_fraction = 0.0;  // worst piece
  double gap_fraction = 0.0;         // exact: hull mass not covered by cells
  double loss_budget = 0.0;          // transition_fraction + gap_fraction
  double delta_se = 0.0;             // binomial half-width for the delta bins
  bool satisfied_within_budget = false;
  long long samples_per_piece = 0;
  long long min_good = 0;  // smallest GOOD count over pieces
  std::uint64_t seed = 0;
  std::string note;
};

// Measures how evenly Phi spreads each u1-piece of the element across the r
// direction, against the stage targets (1/(2k^5q), 1/k^4, 1/n^5, 1/n^5):
//   gamma  theta-extent of the image of a piece (smallest circular window
//          holding every GOOD image angle; TRANSITION samples are excluded
//          and show up in loss_budget instead),
//   delta  1 - covered fraction of 512 r-bins (worst piece),
//   eps1   relative discrepancy |P(image r in J~) * lambda(J_l) - lambda(J~)|
//          / lambda(J~), maximized over dyadic J~ (depth 1..6) fully inside
//          the covered bin set; reported doubled to absorb the dyadic gap,
//   eps2   same with the tangent fiber constrained to the lawful index
//          (j - l mod k_n for even-u0 elements, j + l for odd ones).
// Sampling is stratified: `samples_per_piece` points uniform over the good
// cells of each piece, fiber uniform over T_j. Raises INSUFFICIENT_SAMPLES
// when a piece keeps fewer than 100 GOOD samples.
DistributionReport distribution_constants(const StageParams& stage, const MapExpr& Phi, const CellIndex& element,
                                          long long samples_per_piece, std::uint64_t seed);

// Arithmetic adjustment for replacing Phi by an analytic approximation with
// ||.||_1-distance at most d1_bound:
//   gamma' = gamma + t, delta' = delta + t, eps' = 2 eps + 3 t
// with t = max(2 d1_bound, 2^-n); at d1_bound < 2^-(n+1) this is exactly the
// stated 2^-n adjustment, and it is monotone in d1_bound beyond. Targets are
// relaxed to (1/(k^5 q), 2/k^4, 1/n, 1/n) and the verdict recomputed.
DistributionReport perturbed_constants(const DistributionReport& rep, double d1_bound);

// A product test set in base x fiber coordinates of a declared frame.
//   ELEMENT  the good zeta cells of an element (u0, v0), fiber T_j
//   BOX      a rational box, optionally intersected with the good cell union
//            (theta bounds then must sit on the 1/(2kq) grid and r bounds on
//            the 1/k^5 grid so the exact measure is available)
struct MixingRegion {
  enum class Kind { ELEMENT, BOX };
  Kind kind = Kind::BOX;
  CellIndex element;  // HAT_ETA index when kind == ELEMENT
  Rational theta_lo{0}, theta_hi{1};
  Rational r_lo{0}, r_hi{1};
  Rational t_lo{0}, t_hi{1};
  bool intersect_good = false;
  std::string label;
};

MixingRegion element_region(const CellIndex& hat_index);
MixingRegion box_region(const Rational& theta_lo, const Rational& theta_hi, const Rational& r_lo,
                        const Rational& r_hi, const Rational& t_lo, const Rational& t_hi,
                        bool intersect_good = false);

// Exact product measure of the region (fiber-uniform rule: a frame image of
// S x T has measure mu(S) * lambda(T)).
Rational mu_bar(const PartitionScheme& parts, const MixingRegion& region);

// Monte Carlo check of mu_bar against ambient uniform sampling; returns the
// hit fraction (estimate of the same measure).
double mu_bar_mc(const PartitionScheme& parts, const MixingRegion& region, long long samples, std::uint64_t seed);

struct MixingPairResult {
  std::size_t gamma_index = 0;
  std::size_t square_index = 0;
  Rational mu_gamma{0};
  Rational mu_c{0};
  double p_joint = 0.0;
  double product = 0.0;
  double correlation = 0.0;  // |p_joint - product|
  double std_error = 0.0;
  long long in_gamma = 0;
  long long included = 0;
  long long hits = 0;
  long long excluded = 0;
  double loss_fraction = 0.0;
  double shift_law_fraction = -1.0;  // -1 when the pair has no element frame
};

struct MixingReport {
  std::vector<MixingPairResult> pairs;
  long long samples_per_pair = 0;
  double max_correlation = 0.0;
  double shift_law_fraction = -1.0;
  double loss_budget = 0.0;  // worst pair loss fraction
  double loss_cap = 0.2;
  std::uint64_t seed = 0;
  std::string note;
};

// Correlation |mu(Gamma cap T^-m C) - mu(Gamma) mu(C)| for every pair, where
// T is the projectivized action of f and both regions live in the base
// coordinates of their common frame. Conditional Monte Carlo: points sampled
// uniformly in Gamma, trajectories pushed m steps, membership in C tested;
// p_joint = mu(Gamma) * hit fraction. Trajectories touching a transition
// region are excluded and counted; raises BUDGET_EXCEEDED when the excluded
// fraction of any pair exceeds loss_cap, NO_GOOD_SAMPLES when a pair keeps
// nothing.
MixingReport mixing_correlation(const StageParams& stage, const MapExpr& f, const Int& m,
                                const std::vector<MixingRegion>& gammas, const std::vector<MixingRegion>& squares,
                                long long samples_per_pair, std::uint64_t seed, double loss_cap = 0.2);

// Base-coordinate trajectory map of the mixing criterion: the frame
// H_{n-1} . g_n conjugates f_n^{m_n} to (g_n . Phi_n), so region membership
// is tested after one application of this map.
MapExpr mixing_trajectory(const AssembledStage& st);

struct ShearDistributionCheck {
  Rational lambda_K{0}, lambda_L{0};
  Rational product{0};
  Rational q_lo{0}, q_hi{0};  // certain plateau mass; + band mass
  Rational term_window{0};    // 2 lambda(L) / b
  Rational term_gamma{0};     // 2 gamma / b
  Rational term_strip{0};     // gamma lambda(K)
  Rational term_slope{0};     // (b/a) lambda(K)
  Rational term_edge{0};      // 2 / a
  Rational bound{0};
  bool hypothesis_ok = false;  // b lambda(K) > 2
  bool satisfied = false;
  std::string note;
};

// Exact check that the shear spreads a strip across r: for the window
// [c_l, c_l + gamma] x K, Q = { r in K : the sheared window meets L }, and
// |lambda(Q) - lambda(K) lambda(L)| must fall under the five-term bound.
// lambda(Q) is computed as an exact bracket: plateau contributions are
// decidable, band mass is slack. K = [k1, k2] in r, L is the circular arc of
// length mod1(l2 - l1) starting at l1.
ShearDistributionCheck shear_distribution_check(const StepProfile& sp, const Rational& c_l, const Rational& gamma,
                                                const Rational& l1, const Rational& l2, const Rational& k1,
                                                const Rational& k2);

struct NormReport {
  std::string map_id;
  int r = 1;
  long long grid = 0;
  double estimate = 0.0;     // max partial-derivative magnitude, orders 1..r,
                             // forward and inverse
  double order_r_max = 0.0;  // the top order alone
  double paper_bound = 0.0;  // closed-form shear bound b a^(r-1) eps^-r max|rho^(r)|, else 0
  bool closed_form = false;
  double transition_fraction = 0.0;
  bool transition_heavy = false;
  long long skipped = 0;
  std::string note;
};

// Estimates |||expr|||_r. A bare shear is evaluated in closed form for any r;
// everything else is sampled on a grid x grid lattice: order 1 from jets,
// orders 2..3 by central differences of jet entries gated on region
// clearance (r <= 3 then, else BAD_ARGUMENT).
NormReport norm_estimate(const MapExpr& expr, int r, int grid);

}  // namespace abc
