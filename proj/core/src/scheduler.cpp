#include "abc/scheduler.hpp"

#include <cmath>
#include <sstream>

#include "abc/errors.hpp"

namespace abc {
namespace {

Int gcd(Int a, Int b) { return boost::multiprecision::gcd(a, b); }

// modular inverse of a mod m, gcd(a,m) = 1
Int mod_inverse(Int a, const Int& m) {
  Int t = 0, new_t = 1;
  Int r = m, new_r = ((a % m) + m) % m;
  while (new_r != 0) {
    Int qt = r / new_r;
    Int tmp = t - qt * new_t;
    t = new_t;
    new_t = tmp;
    tmp = r - qt * new_r;
    r = new_r;
    new_r = tmp;
  }
  if (r != 1) raise(ErrorCode::BAD_ARGUMENT, "mod_inverse: not coprime");
  return ((t % m) + m) % m;
}

}  // namespace

StageParams derive_stage(int n, const Int& k, const Int& l, const Int& q, const Int& p,
                         const Rational& sigma, bool strict) {
  if (n < 1 || k < 1 || l < 1 || q < 1)
    raise(ErrorCode::BAD_ARGUMENT, "stage parameters must be positive");
  if (gcd(boost::multiprecision::abs(p), q) != 1)
    raise(ErrorCode::NON_COPRIME, "gcd(p,q) != 1 for p=" + p.str() + ", q=" + q.str());
  if (!(sigma > rat(1, 4) && sigma < rat(1, 2)))
    raise(ErrorCode::BAD_SIGMA, "sigma must lie in (1/4, 1/2), got " + to_string(sigma));

  StageParams st;
  st.n = n;
  st.k = k;
  st.l = l;
  st.q = q;
  st.p = p;
  st.sigma = sigma;

  Int n5 = ipow(Int(n), 5);
  st.shear_a = ipow(k, 5);
  st.shear_b = floor_n_q_sigma(Int(n), q, sigma);
  st.shear_eps = Rational(1, 2 * n5 * ipow(k, 10));
  st.rot_cols = 2 * k * q;
  st.rot_cells = 2 * ipow(k, 11) * q;
  st.rot_grid = ipow(k, 5);
  st.rot_eps = Rational(1, 2 * n5 * ipow(k, 11));
  st.phiA_lambda = 2 * k * q;
  st.phiA_mu = ipow(k, 5);
  st.phiA_eps = Rational(1, 2 * ipow(k, 5));
  st.phiA_eps2 = Rational(1, 4 * n5 * ipow(k, 10));
  st.approx_d = Rational(1, pow2(static_cast<unsigned>(n) * n + 1) * Int(n) * n * l);
  st.approx_eps = st.approx_d / Rational(2 * ipow(k, 8) * q * q);

  if (strict) validate_stage(st);
  return st;
}

void validate_stage(const StageParams& st) {
  StageParams ref = derive_stage(st.n, st.k, st.l, st.q, st.p, st.sigma, false);
  auto fail = [&](const char* field) {
    raise(ErrorCode::INCONSISTENT_PARAMS,
          std::string("derived field '") + field + "' does not match its formula");
  };
  if (st.shear_a != ref.shear_a) fail("shear_a");
  if (st.shear_b != ref.shear_b) fail("shear_b");
  if (st.shear_eps != ref.shear_eps) fail("shear_eps");
  if (st.rot_cols != ref.rot_cols) fail("rot_cols");
  if (st.rot_cells != ref.rot_cells) fail("rot_cells");
  if (st.rot_grid != ref.rot_grid) fail("rot_grid");
  if (st.rot_eps != ref.rot_eps) fail("rot_eps");
  if (st.phiA_lambda != ref.phiA_lambda) fail("phiA_lambda");
  if (st.phiA_mu != ref.phiA_mu) fail("phiA_mu");
  if (st.phiA_eps != ref.phiA_eps) fail("phiA_eps");
  if (st.phiA_eps2 != ref.phiA_eps2) fail("phiA_eps2");
  if (st.approx_d != ref.approx_d) fail("approx_d");
  if (st.approx_eps != ref.approx_eps) fail("approx_eps");
  if (st.shear_b < 1) fail("shear_b");
}

NextAlpha next_alpha(const StageParams& stage) {
  Rational a = stage.alpha() + Rational(1, stage.k * stage.l * stage.q * stage.q);
  a = mod1(a);
  return {a, den(a), num(a)};
}

namespace {

Quantity exact_q(const Rational& r) { return Quantity::of(r); }

ConditionEntry cond_p1(const std::vector<StageParams>& stages, size_t i, const NormEstimates& est) {
  const StageParams& st = stages[i];
  ConditionEntry e;
  e.name = "P1";
  Int n5 = ipow(Int(st.n), 5);
  bool k_ok = st.k >= n5;
  Rational rhs = Rational(1, Int(st.n) * st.n);
  e.rhs = exact_q(rhs);

  std::ostringstream note;
  note << "k >= n^5: " << (k_ok ? "holds" : "fails") << " (k=" << st.k.str()
       << ", n^5=" << n5.str() << "); ";
  bool diam_ok;
  auto it_meas = est.P1_diam.find(st.n);
  if (it_meas != est.P1_diam.end()) {
    e.lhs = Quantity::of_estimate(it_meas->second);
    diam_ok = it_meas->second <= to_double(rhs);
    note << "diam clause from measured diameter of (H_{n-1},dH_{n-1}) on cubes of diam 3/k";
  } else if (st.n == 1) {
    // H_0 = id, sup|dH_0| = 1: Lipschitz image diameter of a diam-3/k cube
    Rational lhs = Rational(3, st.k);
    e.lhs = exact_q(lhs);
    diam_ok = lhs <= rhs;
    note << "diam clause exact at stage 1 (H_0 = id): 3/k vs 1/n^2";
  } else {
    auto it = est.dH_prev_sup.find(st.n);
    if (it == est.dH_prev_sup.end())
      raise(ErrorCode::MISSING_ESTIMATE,
            "P1 at stage " + std::to_string(st.n) + " needs sup|dH_{n-1}|");
    double lhs = it->second * 3.0 / to_double(st.k);
    e.lhs = Quantity::of_estimate(lhs);
    diam_ok = lhs <= to_double(rhs);
    note << "diam clause via Lipschitz surrogate sup|dH_{n-1}| * 3/k (estimate)";
  }
  e.satisfied = k_ok && diam_ok;
  e.note = note.str();
  return e;
}

ConditionEntry cond_p2(const std::vector<StageParams>& stages, size_t i) {
  const StageParams& st = stages[i];
  ConditionEntry e;
  e.name = "P2";
  Rational tail = 0;
  for (size_t u = i; u < stages.size(); ++u) tail += Rational(1, ipow(stages[u].k, 5));
  Rational rhs = Rational(1, 4 * ipow(st.k, 4));
  e.lhs = exact_q(tail);
  e.rhs = exact_q(rhs);
  e.satisfied = tail <= rhs;
  std::ostringstream note;
  note << "tail sum truncated to supplied stages " << st.n << ".." << stages.back().n
       << " (lower bound of the true tail)";
  e.note = note.str();
  return e;
}

ConditionEntry cond_p3(const StageParams& st) {
  ConditionEntry e;
  e.name = "P3";
  Int rhs = ipow(2 * st.k, 4);
  e.lhs = exact_q(Rational(st.q));
  e.rhs = exact_q(Rational(rhs));
  e.satisfied = st.q > rhs;
  e.note = "q^(1/4) > 2k decided by the exact integer equivalent q > (2k)^4";
  return e;
}

ConditionEntry cond_p4(const StageParams& st, const NormEstimates& est) {
  ConditionEntry e;
  e.name = "P4";
  Int q_next = st.k * st.l * st.q * st.q;
  Int rhs = 2 * ipow(st.k, 12) * st.q * st.q;
  e.lhs = exact_q(Rational(q_next));
  e.rhs = exact_q(Rational(rhs));
  bool growth_ok = q_next > rhs;

  Rational l_base = Rational(2 * ipow(st.k, 10) * st.q * st.q);
  bool l_ok;
  std::ostringstream note;
  if (st.n == 1) {
    l_ok = Rational(st.l) >= l_base;  // sup|dH_0| = 1 exactly
    note << "l >= 2 k^10 q^2 sup|dH_{n-1}|: " << (l_ok ? "holds" : "fails")
         << " (exact, stage 1, sup|dH_0|=1); ";
  } else {
    auto it = est.dH_prev_sup.find(st.n);
    if (it == est.dH_prev_sup.end())
      raise(ErrorCode::MISSING_ESTIMATE,
            "P4 at stage " + std::to_string(st.n) + " needs sup|dH_{n-1}|");
    l_ok = to_double(st.l) >= to_double(l_base) * it->second;
    note << "l >= 2 k^10 q^2 sup|dH_{n-1}|: " << (l_ok ? "holds" : "fails") << " (estimate); ";
  }
  note << "lhs/rhs show the exact growth clause q_{n+1} > 2 k^12 q^2 with q_{n+1} = k l q^2";
  e.satisfied = growth_ok && l_ok;
  e.note = note.str();
  return e;
}

ConditionEntry cond_alpha(const StageParams& st, const NormEstimates& est) {
  ConditionEntry e;
  e.name = "ALPHA_CLOSENESS";
  Rational lhs = Rational(1, st.k * st.l * st.q * st.q);
  e.lhs = exact_q(lhs);
  int r = est.r > 0 ? est.r : st.n + 1;
  auto it = est.H_norm_r.find(st.n);
  if (it == est.H_norm_r.end())
    raise(ErrorCode::MISSING_ESTIMATE,
          "ALPHA_CLOSENESS at stage " + std::to_string(st.n) + " needs |||H_n|||_r");
  double norm_pow = std::pow(it->second, r);
  double rhs = 1.0 /
      (std::pow(2.0, st.n + 1) * r * est.C_hat * to_double(st.q) * norm_pow);
  e.rhs = Quantity::of_estimate(rhs);
  e.satisfied = to_double(lhs) < rhs;
  std::ostringstream note;
  note << "finite-stage surrogate: |alpha_{n+1} - alpha_n| = 1/(k l q^2) exact vs "
       << "1/(2^(n+1) r C q |||H_n|||_r^r) with r=" << r << ", C=" << est.C_hat
       << " (estimate-based)";
  e.note = note.str();
  return e;
}

}  // namespace

std::vector<ConditionReport> check_conditions(const std::vector<StageParams>& stages,
                                              const NormEstimates& est) {
  if (stages.empty()) raise(ErrorCode::BAD_ARGUMENT, "check_conditions: no stages");
  std::vector<ConditionReport> out;
  out.reserve(stages.size());
  for (size_t i = 0; i < stages.size(); ++i) {
    ConditionReport rep;
    rep.n = stages[i].n;
    rep.entries.push_back(cond_p1(stages, i, est));
    rep.entries.push_back(cond_p2(stages, i));
    rep.entries.push_back(cond_p3(stages[i]));
    rep.entries.push_back(cond_p4(stages[i], est));
    rep.entries.push_back(cond_alpha(stages[i], est));
    out.push_back(std::move(rep));
  }
  return out;
}

MixingTime mixing_time(const Int& q_n, const Int& q_next, const Int& p_next) {
  if (q_n < 1 || q_next < q_n)
    raise(ErrorCode::BAD_ARGUMENT, "mixing_time needs q_next >= q_n >= 1");
  if (gcd(boost::multiprecision::abs(p_next), q_next) != 1)
    raise(ErrorCode::NON_COPRIME, "gcd(p_next, q_next) != 1");

  // m q_n p_next mod q_next ranges over the multiples of g; pick the candidates
  // within q_n of q_next/2 and solve for the smallest m that reaches each
  Int A = ((q_n * p_next) % q_next + q_next) % q_next;
  Int g = gcd(A == 0 ? q_next : A, q_next);
  Int M = q_next / g;
  Int Ag_inv = mod_inverse(A / g == 0 ? Int(1) : A / g, M);

  // |c/q_next - 1/2| <= q_n/q_next  <=>  c in [q_next/2 - q_n, q_next/2 + q_n]
  Rational half_window_lo = Rational(q_next, 2) - Rational(q_n);
  Rational half_window_hi = Rational(q_next, 2) + Rational(q_n);
  Int c_lo = rceil(half_window_lo / Rational(g));
  Int c_hi = rfloor(half_window_hi / Rational(g));

  Int best_m = -1;
  for (Int j = c_lo; j <= c_hi; ++j) {
    Int c = j * g;  // candidate residue, taken mod q_next
    Int c_mod = ((c % q_next) + q_next) % q_next;
    // verify the distance condition for the wrapped residue
    if (dist_to_int(Rational(c_mod, q_next) - rat(1, 2)) > Rational(q_n, q_next)) continue;
    Int m = (Ag_inv * (c_mod / g)) % M;
    if (m == 0) m = M;
    if (best_m < 0 || m < best_m) best_m = m;
  }
  if (best_m < 0)
    raise(ErrorCode::NO_MIXING_TIME, "no m <= q_next satisfies the mixing threshold");

  // frak_a = (m p_next / q_next - 1/(2 q_n)) mod 1/q_n, centered representative
  Rational x = Rational(best_m * p_next, q_next) - Rational(1, 2 * q_n);
  Rational fa = mod_centered(x, Rational(1, q_n));
  return {best_m, fa};
}

}  // namespace abc
