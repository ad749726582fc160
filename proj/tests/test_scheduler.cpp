#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <optional>

#include <abc/errors.hpp>
#include <abc/rational.hpp>
#include <abc/rng.hpp>
#include <abc/scheduler.hpp>

using namespace abc;

namespace {

StageParams toy() { return derive_stage(1, 2, 4, 2, 1, Rational(3, 8), false); }

// the scan is the definition: least m <= q_next with
// |(m alpha - 1/(2 q_n)) mod 1/q_n|, centered, strictly below q_n / q_next
std::optional<MixingTime> scan_mixing(const Int& q_n, const Int& q_next, const Int& p_next) {
  Rational alpha = mod1(Rational(p_next, q_next));
  Rational period(1, q_n);
  Rational half(1, 2 * q_n);
  Rational tol(q_n, q_next);
  for (Int m = 1; m <= q_next; ++m) {
    Rational a = mod_centered(m * alpha - half, period);
    if (rabs(a) < tol) return MixingTime{m, a};
  }
  return std::nullopt;
}

}  // namespace

TEST_SUITE("scheduler") {

TEST_CASE("toy stage derived fields") {
  StageParams st = toy();
  CHECK(st.shear_a == 32);
  CHECK(st.shear_b == 1);
  CHECK(st.shear_eps == Rational(1, 2048));
  CHECK(st.rot_cols == 8);
  CHECK(st.rot_cells == 8192);
  CHECK(st.rot_grid == 32);
  CHECK(st.rot_eps == Rational(1, 4096));
  CHECK(st.phiA_lambda == 8);
  CHECK(st.phiA_mu == 32);
  CHECK(st.phiA_eps == Rational(1, 64));
  CHECK(st.phiA_eps2 == Rational(1, 4096));
  CHECK(st.approx_d == Rational(1, 16));
  CHECK(st.approx_eps == Rational(1, 32768));
  CHECK(st.alpha() == Rational(1, 2));
}

TEST_CASE("integer floor of n * q^sigma") {
  CHECK(floor_n_q_sigma(1, 2, Rational(3, 8)) == 1);
  CHECK(floor_n_q_sigma(1, 65536, Rational(1, 4)) == 16);   // exact fourth root
  CHECK(floor_n_q_sigma(1, 256, Rational(1, 4)) == 4);      // exact boundary
  CHECK(floor_n_q_sigma(3, 10, Rational(1, 2)) == 9);       // 3 sqrt(10) = 9.48
  CHECK(floor_n_q_sigma(2, 2, Rational(1, 2)) == 2);        // 2 sqrt(2) = 2.82
  CHECK(floor_n_q_sigma(7, 10, Rational(3, 8)) == 16);      // 7 * 10^0.375 = 16.6
  CHECK(floor_n_q_sigma(5, 16, Rational(1, 4)) == 10);      // exact: 5 * 2
}

TEST_CASE("coprimality is enforced") {
  CHECK_THROWS_AS(derive_stage(1, 2, 4, 2, 2, Rational(3, 8), false), Error);
  try {
    derive_stage(1, 2, 4, 2, 2, Rational(3, 8), false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NON_COPRIME);
  }
}

TEST_CASE("validation rejects tampered derived fields") {
  StageParams st = toy();
  st.shear_a = 31;
  CHECK_THROWS_AS(validate_stage(st), Error);
  try {
    validate_stage(st);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::INCONSISTENT_PARAMS);
  }
}

TEST_CASE("rotation number recursion") {
  NextAlpha na = next_alpha(toy());
  CHECK(na.alpha == Rational(17, 32));
  CHECK(na.q == 32);
  CHECK(na.p == 17);

  // fully degenerate stage: alpha wraps to 0 but the formula denominator is 1
  StageParams ones = derive_stage(1, 1, 1, 1, 0, Rational(3, 8), false);
  NextAlpha deg = next_alpha(ones);
  CHECK(deg.q == 1);
  CHECK(deg.alpha == Rational(0));

  StageParams third = derive_stage(1, 3, 9, 3, 1, Rational(3, 8), false);
  NextAlpha na3 = next_alpha(third);
  CHECK(na3.alpha == Rational(82, 243));
  CHECK(na3.q == 243);
}

TEST_CASE("mixing time oracles") {
  MixingTime a = mixing_time(2, 16, 1);
  CHECK(a.m == 3);
  CHECK(a.frak_a == Rational(-1, 16));

  MixingTime b = mixing_time(1, 4, 1);
  CHECK(b.m == 1);

  MixingTime c = mixing_time(1, 1, 1);
  CHECK(c.m == 1);
}

TEST_CASE("mixing time equals the brute-force scan") {
  Rng rng{20260816};
  int premise_hits = 0;
  for (int i = 0; i < 30; ++i) {
    std::uint64_t base = static_cast<std::uint64_t>(i) * 8;
    long long qn = 1 + static_cast<long long>(rng.bits(base) % 50);
    long long span = 10000 - qn;
    long long qx = qn + 1 + static_cast<long long>(rng.bits(base + 1) % static_cast<std::uint64_t>(span));
    long long px = 1 + static_cast<long long>(rng.bits(base + 2) % static_cast<std::uint64_t>(qx));
    Int q_n = qn, q_next = qx, p_next = px;
    while (gcd(p_next, q_next) != 1) p_next += 1;

    std::optional<MixingTime> want = scan_mixing(q_n, q_next, p_next);
    if (!want.has_value()) {
      CHECK_THROWS_AS(mixing_time(q_n, q_next, p_next), Error);
      continue;
    }
    MixingTime got = mixing_time(q_n, q_next, p_next);
    CHECK(got.m == want->m);
    CHECK(got.frak_a == want->frak_a);
    CHECK(got.frak_a >= Rational(-1, 2 * q_n));
    CHECK(got.frak_a < Rational(1, 2 * q_n));
    CHECK(got.m <= q_next);
    if (q_next >= 2 * q_n * q_n) {
      ++premise_hits;
      CHECK(rabs(got.frak_a) <= Rational(1, q_next));
    }
    // the rational value must agree with a floating-point recomputation
    double alpha = to_double(Rational(p_next, q_next));
    double period = 1.0 / to_double(Rational(q_n));
    double x = to_double(got.m) * alpha - 0.5 * period;
    double fa = x - period * std::floor(x / period + 0.5);
    CHECK(std::fabs(fa - to_double(got.frak_a)) <= 1e-12);
  }
  CHECK(premise_hits > 0);
}

TEST_CASE("growth conditions report five entries") {
  StageParams st = toy();
  NormEstimates est;
  est.r = 2;
  est.dH_prev_sup[1] = 1.0;
  est.H_norm_r[1] = 50.0;
  est.P1_diam[1] = 0.01;
  std::vector<ConditionReport> reps = check_conditions({st}, est);
  REQUIRE(reps.size() == 1);
  REQUIRE(reps[0].entries.size() == 5);
  CHECK(reps[0].entries[0].name == "P1");
  CHECK(reps[0].entries[1].name == "P2");
  CHECK(reps[0].entries[2].name == "P3");
  CHECK(reps[0].entries[3].name == "P4");
  CHECK(reps[0].entries[4].name == "ALPHA_CLOSENESS");
  // the toy parameters are deliberately too small for the growth conditions
  CHECK_FALSE(reps[0].entries[2].satisfied);
  CHECK_FALSE(reps[0].entries[3].satisfied);
}

TEST_CASE("P3 flips at q = 257 for k = 2") {
  NormEstimates est;
  est.r = 2;
  est.dH_prev_sup[1] = 1.0;
  est.H_norm_r[1] = 50.0;
  est.P1_diam[1] = 0.01;

  StageParams st = derive_stage(1, 2, 4, 257, 1, Rational(3, 8), false);
  std::vector<ConditionReport> reps = check_conditions({st}, est);
  REQUIRE(reps[0].entries.size() == 5);
  CHECK(reps[0].entries[2].name == "P3");
  CHECK(reps[0].entries[2].satisfied);  // 257^(1/4) > 4 since 257 > 4^4

  StageParams big = derive_stage(1, 2, 4, 65536, 1, Rational(3, 8), false);
  std::vector<ConditionReport> reps2 = check_conditions({big}, est);
  CHECK(reps2[0].entries[2].satisfied);  // 65536^(1/4) = 16 > 4

  StageParams edge = derive_stage(1, 2, 4, 256, 1, Rational(3, 8), false);
  std::vector<ConditionReport> reps3 = check_conditions({edge}, est);
  CHECK_FALSE(reps3[0].entries[2].satisfied);  // 256^(1/4) = 4, not strict
}

TEST_CASE("missing norm estimates are an error") {
  NormEstimates empty;
  CHECK_THROWS_AS(check_conditions({toy()}, empty), Error);
  try {
    check_conditions({toy()}, empty);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MISSING_ESTIMATE);
  }
}

TEST_CASE("quantity keeps exact and estimated values apart") {
  Quantity ex = Quantity::of(Rational(1, 3));
  CHECK(ex.exact);
  CHECK(ex.value == Rational(1, 3));
  CHECK(ex.as_double() == doctest::Approx(1.0 / 3.0));
  Quantity es = Quantity::of_estimate(0.5);
  CHECK_FALSE(es.exact);
  CHECK(es.as_double() == 0.5);
}

}  // TEST_SUITE
