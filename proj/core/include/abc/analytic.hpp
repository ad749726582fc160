#pragma once

#include <string>
#include <utility>
#include <vector>

#include <abc/map_core.hpp>
#include <abc/rational.hpp>
#include <abc/step_profile.hpp>

namespace abc {

enum class ApproxScheme { FEJER, TRUNCATION };

std::string to_string(ApproxScheme s);

// Trigonometric polynomial c0 + sum_m (cosc[m] cos(2 pi m x) + sinc[m] sin(2 pi m x)),
// plus an exact affine carry `slope`*x for lifts whose increase over one period is
// a nonzero rational. The periodic part is entire by construction.
struct TrigProfile {
  int degree = 0;
  std::vector<double> cosc;
  std::vector<double> sinc;
  Rational slope = Rational(0);

  double eval(double x) const;
  double deriv(double x, int order) const;
};

TrigProfile trig_profile(std::vector<double> cosc, std::vector<double> sinc, Rational slope = Rational(0));

// Degree-N Fejer mean or sharp truncation of the Fourier series of the profile's
// smooth periodic part; the affine carry is split off exactly. quad_tol overrides
// the convergence gate (default 1e-9 * max(1, |b|)); pass +infinity to accept an
// under-resolved spectrum and measure the distances honestly.
TrigProfile approximate_profile(const StepProfile& sp, int degree, ApproxScheme scheme, double quad_tol = -1.0);

// Coefficient-sum upper bound for sup over the closed strip |Im z| <= rho of the
// lift's modulus. Returns +infinity on overflow.
double strip_norm(const TrigProfile& tp, double rho);

// Frequency dilation m -> m*q with amplitude 1/q; realizes a (1/q, 0)-periodic map
// from a 1-periodic approximant. The affine carry is unchanged.
TrigProfile periodic_rescale(const TrigProfile& tp, const Int& q);

// True iff every nonzero-coefficient frequency is divisible by q (exact
// coefficient-level commutation with R_{1/q} for maps built from the profile).
bool freq_support_divisible(const TrigProfile& tp, const Int& q, double tol = 0.0);

// Shear (theta + psi(r) mod 1, r) with psi from the profile. Exactly
// area-preserving and commutes with every rigid rotation R_t.
MapExpr analytic_shear_map(const TrigProfile& tp);

struct ApproxReport {
  std::string target;
  int degree = 0;
  ApproxScheme scheme = ApproxScheme::FEJER;
  int grid = 0;
  double d0 = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  std::vector<std::pair<double, double>> strip_bounds;
  Rational eps_target = Rational(0);
  bool satisfied = false;
};

// Grid maxima of point distance, derivative-entry distance, and normalized
// second-difference distance between the two maps; satisfied = all three below
// eps_target.
ApproxReport distance_report(const MapExpr& smooth, const MapExpr& analytic, int grid, const Rational& eps_target);

void write_coefficients_csv(std::ostream& os, const TrigProfile& tp);

}  // namespace abc
