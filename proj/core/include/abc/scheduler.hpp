#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abc/rational.hpp"

namespace abc {

// All parameters of stage n. Derived fields are functions of (n,k,l,q,sigma);
// derive_stage computes them and strict mode re-verifies the stored values.
struct StageParams {
  int n = 1;
  Int k, l, q, p;
  Rational sigma;

  Int shear_a;       // k^5
  Int shear_b;       // floor(n*q^sigma)
  Rational shear_eps;  // 1/(2 n^5 k^10)
  Int rot_cols;      // 2kq
  Int rot_cells;     // 2 k^11 q
  Int rot_grid;      // k^5
  Rational rot_eps;  // 1/(2 n^5 k^11)
  Int phiA_lambda;   // 2kq
  Int phiA_mu;       // k^5
  Rational phiA_eps;   // 1/(2 k^5)
  Rational phiA_eps2;  // 1/(4 n^5 k^10)
  Rational approx_d;   // 1/(2^(n^2+1) n^2 l)
  Rational approx_eps; // approx_d / (2 k^8 q^2), norm-free base value

  Rational alpha() const { return mod1(Rational(p, q)); }
};

// exact floor(n * q^(s/t)). Interval narrowing with an exact integer
// tie-break; equals the integer t-th root of n^t q^s.
Int floor_n_q_sigma(const Int& n, const Int& q, const Rational& sigma);

StageParams derive_stage(int n, const Int& k, const Int& l, const Int& q, const Int& p,
                         const Rational& sigma, bool strict);

// strict re-verification of every derived field against its formula
void validate_stage(const StageParams& st);

struct NextAlpha {
  Rational alpha;  // representative in [0,1)
  Int q, p;
};

NextAlpha next_alpha(const StageParams& stage);

// an exact rational or a floating-point estimate, never confused
struct Quantity {
  bool exact = true;
  Rational value;
  double estimate = 0.0;

  static Quantity of(const Rational& r) { return {true, r, to_double(r)}; }
  static Quantity of_estimate(double e) { return {false, Rational(0), e}; }
  double as_double() const { return exact ? to_double(value) : estimate; }
};

struct ConditionEntry {
  std::string name;  // P1, P2, P3, P4, ALPHA_CLOSENESS
  bool satisfied = false;
  Quantity lhs, rhs;
  std::string note;
};

struct ConditionReport {
  int n = 1;
  std::vector<ConditionEntry> entries;  // exactly the five conditions, in order
};

// numerically estimated norms, keyed by stage index n
struct NormEstimates {
  std::map<int, double> dH_prev_sup;  // sup|dH_{n-1}| (stage 1 defaults to exact 1)
  std::map<int, double> H_norm_r;     // |||H_n|||_r
  std::map<int, double> P1_diam;      // measured diam bound, overrides the Lipschitz surrogate
  double C_hat = 1.0;
  int r = 0;  // 0 means use r = n+1
};

std::vector<ConditionReport> check_conditions(const std::vector<StageParams>& stages,
                                              const NormEstimates& est);

struct MixingTime {
  Int m;
  Rational frak_a;  // representative in [-1/(2 q_n), 1/(2 q_n))
};

MixingTime mixing_time(const Int& q_n, const Int& q_next, const Int& p_next);

}  // namespace abc
