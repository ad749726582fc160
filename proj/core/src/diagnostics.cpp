#include <abc/diagnostics.hpp>

#include <abc/rng.hpp>
#include <abc/taylor.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <thread>
#include <utility>

namespace abc {

int workers_from_env() {
  if (const char* env = std::getenv("ABC_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 256) return static_cast<int>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(std::min(hw, 16u)) : 4;
}

namespace {

constexpr long long kChunk = 4096;

// substream for sample i, component c; wider stride than Rng::at so samplers
// with many components never collide across samples
inline std::uint64_t cnt(std::uint64_t i, std::uint64_t c) { return i * 16 + c; }

long long to_ll(const Int& x, const char* what) {
  if (x > (Int(1) << 62) || x < -(Int(1) << 62))
    raise(ErrorCode::BAD_ARGUMENT, std::string(what) + ": value too large for float-mode sampling");
  return x.convert_to<long long>();
}

// Runs fn(partial, lo, hi) over [0, total) in fixed 4096-sample chunks.
// Chunk results land in chunk-indexed slots, so the merged outcome does not
// depend on the worker count or scheduling.
template <class Partial, class Fn>
std::vector<Partial> run_chunks(long long total, const Fn& fn) {
  if (total <= 0) return {};
  long long nchunks = (total + kChunk - 1) / kChunk;
  std::vector<Partial> parts(static_cast<std::size_t>(nchunks));
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(nchunks));
  long long nw = std::min<long long>(workers_from_env(), nchunks);
  std::atomic<long long> next{0};
  auto work = [&] {
    for (;;) {
      long long c = next.fetch_add(1);
      if (c >= nchunks) return;
      long long lo = c * kChunk;
      long long hi = std::min(total, lo + kChunk);
      try {
        fn(parts[static_cast<std::size_t>(c)], lo, hi);
      } catch (...) {
        errs[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (long long w = 1; w < nw; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return parts;
}

}  // namespace

double matrix_deviation(const Mat2& m) {
  double det = m.det();
  if (std::fabs(det) < 1e-300) raise(ErrorCode::SINGULAR_DERIV, "matrix_deviation: singular matrix");
  double trace_sq = m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d;
  double disc = trace_sq * trace_sq - 4.0 * det * det;
  disc = disc > 0.0 ? std::sqrt(disc) : 0.0;
  double s1 = std::sqrt((trace_sq + disc) * 0.5);
  double s2 = std::fabs(det) / s1;
  return std::max(std::fabs(std::log(s1)), std::fabs(std::log(s2)));
}

DeviationReport deviation(const PartitionScheme& parts, const MapExpr& expr, const CellIndex& cell,
                          long long samples, int angles, std::uint64_t seed) {
  if (samples < 1) raise(ErrorCode::BAD_ARGUMENT, "deviation: samples must be positive");
  if (angles < 1) raise(ErrorCode::BAD_ARGUMENT, "deviation: angles must be positive");
  CellBox bx = parts.box(cell);
  double th0 = to_double(bx.theta_lo), thw = to_double(bx.theta_hi - bx.theta_lo);
  double r0 = to_double(bx.r_lo), rw = to_double(bx.r_hi - bx.r_lo);
  std::vector<double> ca(static_cast<std::size_t>(angles)), sa(static_cast<std::size_t>(angles));
  for (int k = 0; k < angles; ++k) {
    double ang = std::numbers::pi * k / angles;
    ca[static_cast<std::size_t>(k)] = std::cos(ang);
    sa[static_cast<std::size_t>(k)] = std::sin(ang);
  }
  struct Partial {
    long long good = 0;
    double dev = 0.0;
  };
  Rng rng{seed};
  auto partials = run_chunks<Partial>(samples, [&](Partial& part, long long lo, long long hi) {
    for (long long i = lo; i < hi; ++i) {
      std::uint64_t u = static_cast<std::uint64_t>(i);
      TorusPoint p{mod1d(th0 + thw * rng.uniform(cnt(u, 0))), mod1d(r0 + rw * rng.uniform(cnt(u, 1)))};
      PartialMapResult res = eval_jet(expr, p);
      if (res.tag != Tag::GOOD) continue;
      ++part.good;
      const Mat2& J = res.jet.deriv;
      for (int k = 0; k < angles; ++k) {
        std::size_t ks = static_cast<std::size_t>(k);
        double wx = J.a * ca[ks] + J.b * sa[ks];
        double wy = J.c * ca[ks] + J.d * sa[ks];
        double dv = std::fabs(std::log(std::sqrt(wx * wx + wy * wy)));
        if (dv > part.dev) part.dev = dv;
      }
    }
  });
  DeviationReport rep;
  rep.cell = cell;
  rep.samples = samples;
  rep.angles = angles;
  rep.seed = seed;
  for (const auto& part : partials) {
    rep.good_samples += part.good;
    if (part.dev > rep.dev) rep.dev = part.dev;
  }
  rep.good_fraction = static_cast<double>(rep.good_samples) / static_cast<double>(samples);
  if (rep.good_samples == 0)
    raise(ErrorCode::NO_GOOD_SAMPLES, "deviation: no GOOD samples in cell " + to_string(cell));
  return rep;
}

Mat2 pullback_metric(const MapExpr& H, const TorusPoint& p) {
  PartialMapResult res = eval_jet_inverse(H, p);
  if (res.tag != Tag::GOOD)
    raise(ErrorCode::TRANSITION_AT_POINT, "pullback_metric: inverse evaluation not smooth-classified at the point");
  Mat2 J = res.jet.deriv;
  return J.transpose() * J;
}

namespace {

// Uniform sampler over the good zeta cells of one element (u0, v0), fiber
// uniform in [t0, t0+tw). fixed_u1 >= 0 pins the piece; otherwise u1 is drawn
// too. Digit draws use modulo on 64 random bits (bias < range / 2^64).
struct PieceSampler {
  long long k = 1, d = 1, v1_lo = 0, v1_count = 1;
  int fixed_u1 = -1;
  double base_th = 0.0, v0_base = 0.0;
  double inv_u1 = 0.0, inv_u2 = 0.0, inv_u3 = 0.0, inv_u4 = 0.0, inv_v1 = 0.0, inv_v2 = 0.0;
  double mzf_th = 0.0, mzf_r = 0.0;  // margin as a fraction of one cell slot
  double t0 = 0.0, tw = 1.0;

  static PieceSampler make(const StageParams& st, const Int& u0, const Int& v0, int fixed_u1, const Rational& t_lo,
                           const Rational& t_hi) {
    PieceSampler s;
    Int k5 = ipow(st.k, 5);
    Int s_u1 = 2 * st.k * st.q;
    Int s_u2 = 2 * ipow(st.k, 6) * st.q;
    Int s_u3 = 2 * ipow(st.k, 11) * st.q;
    Int s_u4 = 2 * ipow(st.k, 16) * st.q;
    Rational mz = Rational(1, 4 * ipow(Int(st.n), 5) * ipow(st.k, 26) * st.q);
    s.k = to_ll(st.k, "piece sampler k");
    s.d = to_ll(k5 - 2, "piece sampler digit range");
    if (s.d < 1) raise(ErrorCode::BAD_ARGUMENT, "piece sampler: partition is empty at these parameters");
    s.v1_lo = to_ll(2 * st.q, "piece sampler v1");
    s.v1_count = to_ll(2 * ipow(st.k, 6) * st.q - 4 * st.q, "piece sampler v1 range");
    if (s.v1_count < 1) raise(ErrorCode::BAD_ARGUMENT, "piece sampler: empty v1 range");
    s.fixed_u1 = fixed_u1;
    s.base_th = to_double(Rational(u0, 2 * st.q));
    s.v0_base = to_double(Rational(v0, k5));
    s.inv_u1 = to_double(Rational(1, s_u1));
    s.inv_u2 = to_double(Rational(1, s_u2));
    s.inv_u3 = to_double(Rational(1, s_u3));
    s.inv_u4 = to_double(Rational(1, s_u4));
    s.inv_v1 = to_double(Rational(1, s_u3));
    s.inv_v2 = to_double(Rational(1, s_u4));
    s.mzf_th = to_double(mz * s_u4);
    s.mzf_r = to_double(mz * s_u4);
    s.t0 = to_double(t_lo);
    s.tw = to_double(t_hi - t_lo);
    return s;
  }

  // returns the sampled projective point and the piece digit u1
  std::pair<ProjPoint, long long> draw(const Rng& rng, std::uint64_t gid) const {
    long long u1 = fixed_u1 >= 0 ? fixed_u1 : static_cast<long long>(rng.bits(cnt(gid, 0)) % static_cast<std::uint64_t>(k));
    long long u2 = 1 + static_cast<long long>(rng.bits(cnt(gid, 1)) % static_cast<std::uint64_t>(d));
    long long u3 = 1 + static_cast<long long>(rng.bits(cnt(gid, 2)) % static_cast<std::uint64_t>(d));
    long long u4 = 1 + static_cast<long long>(rng.bits(cnt(gid, 3)) % static_cast<std::uint64_t>(d));
    long long v1 = v1_lo + static_cast<long long>(rng.bits(cnt(gid, 4)) % static_cast<std::uint64_t>(v1_count));
    long long v2 = 1 + static_cast<long long>(rng.bits(cnt(gid, 5)) % static_cast<std::uint64_t>(d));
    double offt = mzf_th + (1.0 - 2.0 * mzf_th) * rng.uniform(cnt(gid, 6));
    double offr = mzf_r + (1.0 - 2.0 * mzf_r) * rng.uniform(cnt(gid, 7));
    double th = base_th + static_cast<double>(u1) * inv_u1 + static_cast<double>(u2) * inv_u2 +
                static_cast<double>(u3) * inv_u3 + (static_cast<double>(u4) + offt) * inv_u4;
    double r = v0_base + static_cast<double>(v1) * inv_v1 + (static_cast<double>(v2) + offr) * inv_v2;
    double t = t0 + tw * rng.uniform(cnt(gid, 8));
    return {ProjPoint{TorusPoint{mod1d(th), mod1d(r)}, t}, u1};
  }
};

}  // namespace

DistributionReport distribution_constants(const StageParams& stage, const MapExpr& Phi, const CellIndex& element,
                                          long long samples_per_piece, std::uint64_t seed) {
  if (element.level != Level::HAT_ETA)
    raise(ErrorCode::BAD_ARGUMENT, "distribution_constants: element must be a fibered (HAT) index");
  if (samples_per_piece < 1) raise(ErrorCode::BAD_ARGUMENT, "distribution_constants: samples must be positive");
  PartitionScheme parts(stage);
  CellBox ebox = parts.box(element);  // validates the index, supplies T_j
  long long k = to_ll(stage.k, "distribution k");
  long long j = to_ll(element.j, "distribution j");

  DistributionReport rep;
  rep.element = element;
  rep.n = stage.n;
  rep.samples_per_piece = samples_per_piece;
  rep.seed = seed;
  rep.gamma_target = Rational(1, 2 * ipow(stage.k, 5) * stage.q);
  rep.delta_target = Rational(1, ipow(stage.k, 4));
  rep.eps1_target = Rational(1, ipow(Int(stage.n), 5));
  rep.eps2_target = rep.eps1_target;

  Rational hull_area = parts.piece_hull(element.u0, Int(0), element.v0).area();
  rep.gap_fraction = 1.0 - to_double(parts.tilde_piece_measure() / hull_area);

  constexpr int kBins = 512;
  struct Partial {
    long long good = 0, trans = 0, law = 0;
    std::array<long long, kBins> hist{};
    std::array<long long, kBins> hist_fib{};
    std::vector<double> thetas;
  };

  Rng rng{seed};
  rep.min_good = std::numeric_limits<long long>::max();
  long long law_hits = 0, law_total = 0;
  for (long long l = 0; l < k; ++l) {
    PieceSampler sampler =
        PieceSampler::make(stage, element.u0, element.v0, static_cast<int>(l), ebox.t_lo, ebox.t_hi);
    // On even half-columns the pieces traverse the inner rotation through the
    // inverse leg, so the fiber shift is -u1 there; on odd ones it is +u1.
    const bool even_u0 = element.u0 % 2 == 0;
    long long lawful = even_u0 ? ((j - l) % k + k) % k : (l + j) % k;
    auto partials = run_chunks<Partial>(samples_per_piece, [&](Partial& part, long long lo, long long hi) {
      part.thetas.reserve(static_cast<std::size_t>(hi - lo));
      for (long long i = lo; i < hi; ++i) {
        std::uint64_t gid = static_cast<std::uint64_t>(l * samples_per_piece + i);
        ProjPoint x = sampler.draw(rng, gid).first;
        ProjResult res = eval_proj(Phi, x);
        if (res.tag != Tag::GOOD) {
          ++part.trans;
          continue;
        }
        ++part.good;
        double r_img = res.p.point.r;
        int bin = std::min(kBins - 1, static_cast<int>(r_img * kBins));
        ++part.hist[static_cast<std::size_t>(bin)];
        long long idx = static_cast<long long>(res.p.t * static_cast<double>(k)) % k;
        if (idx == lawful) {
          ++part.law;
          ++part.hist_fib[static_cast<std::size_t>(bin)];
        }
        part.thetas.push_back(res.p.point.theta);
      }
    });

    long long good = 0, trans = 0, law = 0;
    std::array<long long, kBins> hist{}, hist_fib{};
    std::vector<double> thetas;
    thetas.reserve(static_cast<std::size_t>(samples_per_piece));
    for (auto& part : partials) {
      good += part.good;
      trans += part.trans;
      law += part.law;
      for (int b = 0; b < kBins; ++b) {
        hist[static_cast<std::size_t>(b)] += part.hist[static_cast<std::size_t>(b)];
        hist_fib[static_cast<std::size_t>(b)] += part.hist_fib[static_cast<std::size_t>(b)];
      }
      thetas.insert(thetas.end(), part.thetas.begin(), part.thetas.end());
    }
    if (good < 100)
      raise(ErrorCode::INSUFFICIENT_SAMPLES, "distribution_constants: piece " + std::to_string(l) + " kept only " +
                                                 std::to_string(good) + " GOOD samples");
    law_hits += law;
    law_total += good;
    rep.min_good = std::min(rep.min_good, good);
    double tau = static_cast<double>(trans) / static_cast<double>(samples_per_piece);
    rep.transition_fraction = std::max(rep.transition_fraction, tau);

    // gamma: smallest circular window holding every GOOD image angle
    std::sort(thetas.begin(), thetas.end());
    long long n = static_cast<long long>(thetas.size());
    double best = 1.0;
    for (long long i = 0; i < n; ++i) {
      long long jth = i + n - 1;
      double width = jth < n ? thetas[static_cast<std::size_t>(jth)] - thetas[static_cast<std::size_t>(i)]
                             : thetas[static_cast<std::size_t>(jth - n)] + 1.0 - thetas[static_cast<std::size_t>(i)];
      if (width < best) best = width;
    }
    rep.gamma = std::max(rep.gamma, best);

    // delta: uncovered fraction of the r bins
    int covered = 0;
    for (int b = 0; b < kBins; ++b)
      if (hist[static_cast<std::size_t>(b)] > 0) ++covered;
    rep.delta = std::max(rep.delta, 1.0 - static_cast<double>(covered) / kBins);
    double lam_jl = static_cast<double>(covered) / kBins;

    // eps1/eps2: relative discrepancy over fully covered dyadic intervals
    for (int depth = 1; depth <= 6; ++depth) {
      int nint = 1 << depth;
      int span = kBins >> depth;
      for (int ii = 0; ii < nint; ++ii) {
        bool full = true;
        long long cnt1 = 0, cnt2 = 0;
        for (int b = ii * span; b < (ii + 1) * span; ++b) {
          if (hist[static_cast<std::size_t>(b)] == 0) {
            full = false;
            break;
          }
          cnt1 += hist[static_cast<std::size_t>(b)];
          cnt2 += hist_fib[static_cast<std::size_t>(b)];
        }
        if (!full) continue;
        double lam_jt = 1.0 / nint;
        double p1 = static_cast<double>(cnt1) / static_cast<double>(good);
        double p2 = static_cast<double>(cnt2) / static_cast<double>(good);
        rep.eps1 = std::max(rep.eps1, 2.0 * std::fabs(p1 * lam_jl - lam_jt) / lam_jt);
        rep.eps2 = std::max(rep.eps2, 2.0 * std::fabs(p2 * lam_jl - lam_jt) / lam_jt);
      }
    }
  }

  rep.shift_law_fraction = law_total > 0 ? static_cast<double>(law_hits) / static_cast<double>(law_total) : 0.0;
  rep.loss_budget = rep.transition_fraction + rep.gap_fraction;
  rep.delta_se = 0.5 / std::sqrt(static_cast<double>(std::max<long long>(1, rep.min_good)));
  rep.satisfied_within_budget = rep.gamma <= to_double(rep.gamma_target) + rep.loss_budget &&
                                rep.delta <= to_double(rep.delta_target) + rep.loss_budget + 3.0 * rep.delta_se &&
                                rep.eps1 <= to_double(rep.eps1_target) + 2.0 * rep.loss_budget &&
                                rep.eps2 <= to_double(rep.eps2_target) + 2.0 * rep.loss_budget;
  return rep;
}

DistributionReport perturbed_constants(const DistributionReport& rep, double d1_bound) {
  if (!(d1_bound >= 0.0)) raise(ErrorCode::BAD_ARGUMENT, "perturbed_constants: d1_bound must be >= 0");
  DistributionReport out = rep;
  double step = std::max(2.0 * d1_bound, std::pow(2.0, -rep.n));
  out.gamma = rep.gamma + step;
  out.delta = rep.delta + step;
  out.eps1 = 2.0 * rep.eps1 + 3.0 * step;
  out.eps2 = 2.0 * rep.eps2 + 3.0 * step;
  out.gamma_target = rep.gamma_target * 2;
  out.delta_target = rep.delta_target * 2;
  out.eps1_target = Rational(1, rep.n);
  out.eps2_target = Rational(1, rep.n);
  out.satisfied_within_budget = out.gamma <= to_double(out.gamma_target) &&
                                out.delta <= to_double(out.delta_target) + out.loss_budget + 3.0 * out.delta_se &&
                                out.eps1 <= to_double(out.eps1_target) + 2.0 * out.loss_budget &&
                                out.eps2 <= to_double(out.eps2_target) + 2.0 * out.loss_budget;
  out.note = "perturbed: step " + std::to_string(step) +
             (d1_bound < std::pow(2.0, -(rep.n + 1)) ? " (within the stated validity range)"
                                                     : " (beyond the stated validity range, monotone extension)");
  return out;
}

MixingRegion element_region(const CellIndex& hat_index) {
  if (hat_index.level != Level::HAT_ETA)
    raise(ErrorCode::BAD_ARGUMENT, "element_region: index must be a fibered (HAT) element");
  MixingRegion r;
  r.kind = MixingRegion::Kind::ELEMENT;
  r.element = hat_index;
  r.label = to_string(hat_index);
  return r;
}

MixingRegion box_region(const Rational& theta_lo, const Rational& theta_hi, const Rational& r_lo,
                        const Rational& r_hi, const Rational& t_lo, const Rational& t_hi, bool intersect_good) {
  MixingRegion r;
  r.kind = MixingRegion::Kind::BOX;
  r.theta_lo = theta_lo;
  r.theta_hi = theta_hi;
  r.r_lo = r_lo;
  r.r_hi = r_hi;
  r.t_lo = t_lo;
  r.t_hi = t_hi;
  r.intersect_good = intersect_good;
  return r;
}

namespace {

struct RegionGeom {
  bool element = false;
  bool good = false;
  Int u0, v0;
  double th_lo = 0.0, th_hi = 1.0, r_lo = 0.0, r_hi = 1.0, t_lo = 0.0, t_hi = 1.0;
};

RegionGeom make_geom(const PartitionScheme& parts, const MixingRegion& rg) {
  RegionGeom g;
  if (rg.kind == MixingRegion::Kind::ELEMENT) {
    CellBox bx = parts.box(rg.element);
    g.element = true;
    g.u0 = rg.element.u0;
    g.v0 = rg.element.v0;
    g.t_lo = to_double(bx.t_lo);
    g.t_hi = to_double(bx.t_hi);
    return g;
  }
  auto ok = [](const Rational& lo, const Rational& hi) { return lo >= 0 && lo < hi && hi <= 1; };
  if (!ok(rg.theta_lo, rg.theta_hi) || !ok(rg.r_lo, rg.r_hi) || !ok(rg.t_lo, rg.t_hi))
    raise(ErrorCode::BAD_ARGUMENT, "mixing region: box bounds must be nested in [0,1]");
  g.good = rg.intersect_good;
  g.th_lo = to_double(rg.theta_lo);
  g.th_hi = to_double(rg.theta_hi);
  g.r_lo = to_double(rg.r_lo);
  g.r_hi = to_double(rg.r_hi);
  g.t_lo = to_double(rg.t_lo);
  g.t_hi = to_double(rg.t_hi);
  return g;
}

bool geom_contains(const PartitionScheme& parts, const RegionGeom& g, const TorusPoint& p, double t) {
  if (t < g.t_lo || t >= g.t_hi) return false;
  if (g.element) {
    auto c = parts.locate(Level::ZETA, p);
    return c.has_value() && c->u0 == g.u0 && c->v0 == g.v0;
  }
  if (p.theta < g.th_lo || p.theta >= g.th_hi || p.r < g.r_lo || p.r >= g.r_hi) return false;
  if (g.good) return parts.locate(Level::ZETA, p).has_value();
  return true;
}

}  // namespace

Rational mu_bar(const PartitionScheme& parts, const MixingRegion& region) {
  if (region.kind == MixingRegion::Kind::ELEMENT) {
    parts.box(region.element);  // validates
    return parts.tilde_piece_measure();
  }
  make_geom(parts, region);  // validates bounds
  Rational base = region.intersect_good
                      ? parts.zeta_good_measure(region.theta_lo, region.theta_hi, region.r_lo, region.r_hi)
                      : (region.theta_hi - region.theta_lo) * (region.r_hi - region.r_lo);
  return base * (region.t_hi - region.t_lo);
}

double mu_bar_mc(const PartitionScheme& parts, const MixingRegion& region, long long samples, std::uint64_t seed) {
  if (samples < 1) raise(ErrorCode::BAD_ARGUMENT, "mu_bar_mc: samples must be positive");
  RegionGeom geom = make_geom(parts, region);
  Rng rng{seed};
  struct Partial {
    long long hits = 0;
  };
  auto partials = run_chunks<Partial>(samples, [&](Partial& part, long long lo, long long hi) {
    for (long long i = lo; i < hi; ++i) {
      std::uint64_t u = static_cast<std::uint64_t>(i);
      TorusPoint p{rng.uniform(cnt(u, 0)), rng.uniform(cnt(u, 1))};
      double t = rng.uniform(cnt(u, 2));
      if (geom_contains(parts, geom, p, t)) ++part.hits;
    }
  });
  long long hits = 0;
  for (const auto& part : partials) hits += part.hits;
  return static_cast<double>(hits) / static_cast<double>(samples);
}

MixingReport mixing_correlation(const StageParams& stage, const MapExpr& f, const Int& m,
                                const std::vector<MixingRegion>& gammas, const std::vector<MixingRegion>& squares,
                                long long samples_per_pair, std::uint64_t seed, double loss_cap) {
  if (gammas.empty() || squares.empty())
    raise(ErrorCode::BAD_ARGUMENT, "mixing_correlation: need at least one region on each side");
  if (samples_per_pair < 1) raise(ErrorCode::BAD_ARGUMENT, "mixing_correlation: samples must be positive");
  if (m < 1 || m > 1000000) raise(ErrorCode::BAD_ARGUMENT, "mixing_correlation: m out of range");
  long long mi = to_ll(m, "mixing m");
  PartitionScheme parts(stage);
  long long k = to_ll(stage.k, "mixing k");
  for (const auto& sq : squares) {
    if (sq.kind == MixingRegion::Kind::BOX && sq.intersect_good) {
      Rational lo(1, 4 * stage.k), hi(2, stage.k);
      Rational sth = sq.theta_hi - sq.theta_lo, sr = sq.r_hi - sq.r_lo;
      if (sth < lo || sth > hi || sr < lo || sr > hi)
        raise(ErrorCode::BAD_ARGUMENT, "mixing_correlation: square side must lie in [1/(4k), 2/k]");
    }
  }

  MixingReport rep;
  rep.samples_per_pair = samples_per_pair;
  rep.seed = seed;
  rep.loss_cap = loss_cap;
  Rng rng{seed};
  long long law_hits_all = 0, law_total_all = 0;

  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    const MixingRegion& gamma_rg = gammas[gi];
    RegionGeom gamma_geom = make_geom(parts, gamma_rg);
    bool gamma_element = gamma_rg.kind == MixingRegion::Kind::ELEMENT;
    PieceSampler element_sampler;
    long long jf = 0;
    bool even_u0 = true;
    if (gamma_element) {
      CellBox ebox = parts.box(gamma_rg.element);
      element_sampler = PieceSampler::make(stage, gamma_rg.element.u0, gamma_rg.element.v0, -1, ebox.t_lo, ebox.t_hi);
      jf = to_ll(gamma_rg.element.j, "mixing element fiber");
      even_u0 = gamma_rg.element.u0 % 2 == 0;
    }
    double bth0 = gamma_geom.th_lo, bthw = gamma_geom.th_hi - gamma_geom.th_lo;
    double br0 = gamma_geom.r_lo, brw = gamma_geom.r_hi - gamma_geom.r_lo;
    double bt0 = gamma_geom.t_lo, btw = gamma_geom.t_hi - gamma_geom.t_lo;
    Rational mu_g = mu_bar(parts, gamma_rg);

    for (std::size_t si = 0; si < squares.size(); ++si) {
      const MixingRegion& c_rg = squares[si];
      RegionGeom c_geom = make_geom(parts, c_rg);
      Rational mu_c = mu_bar(parts, c_rg);

      struct Partial {
        long long in_gamma = 0, included = 0, hits = 0, excluded = 0, law_hits = 0, law_n = 0;
      };
      std::uint64_t pair_base = static_cast<std::uint64_t>(gi * squares.size() + si) *
                                static_cast<std::uint64_t>(samples_per_pair);
      auto partials = run_chunks<Partial>(samples_per_pair, [&](Partial& part, long long lo, long long hi) {
        for (long long i = lo; i < hi; ++i) {
          std::uint64_t gid = pair_base + static_cast<std::uint64_t>(i);
          ProjPoint x;
          long long piece = -1;
          if (gamma_element) {
            auto drawn = element_sampler.draw(rng, gid);
            x = drawn.first;
            piece = drawn.second;
          } else {
            x = ProjPoint{TorusPoint{mod1d(bth0 + bthw * rng.uniform(cnt(gid, 0))),
                                     mod1d(br0 + brw * rng.uniform(cnt(gid, 1)))},
                          bt0 + btw * rng.uniform(cnt(gid, 2))};
            if (gamma_geom.good && !parts.locate(Level::ZETA, x.point).has_value()) continue;
          }
          ++part.in_gamma;
          bool ok = true;
          try {
            for (long long step = 0; step < mi; ++step) {
              ProjResult res = eval_proj(f, x);
              if (res.tag != Tag::GOOD) {
                ok = false;
                break;
              }
              x = res.p;
            }
          } catch (const Error&) {
            ok = false;
          }
          if (!ok) {
            ++part.excluded;
            continue;
          }
          ++part.included;
          if (geom_contains(parts, c_geom, x.point, x.t)) ++part.hits;
          if (piece >= 0 && k >= 1) {
            ++part.law_n;
            long long idx = static_cast<long long>(x.t * static_cast<double>(k)) % k;
            // fiber shift is -u1 for even-half-column sources, +u1 for odd
            long long lawful = even_u0 ? ((jf - piece) % k + k) % k : (piece + jf) % k;
            if (idx == lawful) ++part.law_hits;
          }
        }
      });

      MixingPairResult pr;
      pr.gamma_index = gi;
      pr.square_index = si;
      pr.mu_gamma = mu_g;
      pr.mu_c = mu_c;
      long long law_hits = 0, law_n = 0;
      for (const auto& part : partials) {
        pr.in_gamma += part.in_gamma;
        pr.included += part.included;
        pr.hits += part.hits;
        pr.excluded += part.excluded;
        law_hits += part.law_hits;
        law_n += part.law_n;
      }
      if (pr.included == 0)
        raise(ErrorCode::NO_GOOD_SAMPLES, "mixing_correlation: pair (" + std::to_string(gi) + "," +
                                              std::to_string(si) + ") kept no usable trajectories");
      pr.loss_fraction = static_cast<double>(pr.excluded) / static_cast<double>(pr.in_gamma);
      if (pr.loss_fraction > loss_cap)
        raise(ErrorCode::BUDGET_EXCEEDED, "mixing_correlation: excluded fraction " +
                                              std::to_string(pr.loss_fraction) + " exceeds cap " +
                                              std::to_string(loss_cap));
      double p_hat = static_cast<double>(pr.hits) / static_cast<double>(pr.included);
      double mu_g_d = to_double(mu_g), mu_c_d = to_double(mu_c);
      pr.p_joint = mu_g_d * p_hat;
      pr.product = mu_g_d * mu_c_d;
      pr.correlation = std::fabs(pr.p_joint - pr.product);
      pr.std_error = mu_g_d * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(pr.included));
      if (law_n > 0) pr.shift_law_fraction = static_cast<double>(law_hits) / static_cast<double>(law_n);
      law_hits_all += law_hits;
      law_total_all += law_n;
      rep.max_correlation = std::max(rep.max_correlation, pr.correlation);
      rep.loss_budget = std::max(rep.loss_budget, pr.loss_fraction);
      rep.pairs.push_back(std::move(pr));
    }
  }
  if (law_total_all > 0)
    rep.shift_law_fraction = static_cast<double>(law_hits_all) / static_cast<double>(law_total_all);
  return rep;
}

MapExpr mixing_trajectory(const AssembledStage& st) {
  return chain({st.Phi, shear_map(st.params)}, "traj" + std::to_string(st.params.n));
}

ShearDistributionCheck shear_distribution_check(const StepProfile& sp, const Rational& c_l, const Rational& gamma,
                                                const Rational& l1, const Rational& l2, const Rational& k1,
                                                const Rational& k2) {
  if (!(k1 >= 0 && k1 < k2 && k2 <= 1))
    raise(ErrorCode::BAD_ARGUMENT, "shear_distribution_check: need 0 <= k1 < k2 <= 1");
  if (!(gamma > 0 && gamma < 1)) raise(ErrorCode::BAD_ARGUMENT, "shear_distribution_check: gamma must be in (0,1)");
  ShearDistributionCheck out;
  out.lambda_K = k2 - k1;
  out.lambda_L = mod1(l2 - l1);
  if (out.lambda_L == 0) raise(ErrorCode::BAD_ARGUMENT, "shear_distribution_check: L must have positive length");
  out.product = out.lambda_K * out.lambda_L;
  Rational a(sp.a), b(sp.b);
  out.hypothesis_ok = b * out.lambda_K > 2;

  Rational lstart = mod1(l1);
  Rational plateau_mass(0), member_mass(0);
  for (Int jd = 0; jd < sp.a; ++jd) {
    Rational lo = jd == 0 ? Rational(0) : (Rational(jd) + 2 * sp.eps) / a;
    Rational hi = jd == sp.a - 1 ? Rational(1) : (Rational(jd) + 1 - 2 * sp.eps) / a;
    Rational ilo = lo > k1 ? lo : k1;
    Rational ihi = hi < k2 ? hi : k2;
    if (ihi <= ilo) continue;
    Rational len = ihi - ilo;
    plateau_mass += len;
    Rational w = mod1(c_l + b * Rational(jd) / a);
    bool member = mod1(w - lstart) <= out.lambda_L || mod1(lstart - w) <= gamma;
    if (member) member_mass += len;
  }
  out.q_lo = member_mass;
  out.q_hi = member_mass + (out.lambda_K - plateau_mass);

  out.term_window = 2 * out.lambda_L / b;
  out.term_gamma = 2 * gamma / b;
  out.term_strip = gamma * out.lambda_K;
  out.term_slope = b * out.lambda_K / a;
  out.term_edge = Rational(2) / a;
  out.bound = out.term_window + out.term_gamma + out.term_strip + out.term_slope + out.term_edge;

  Rational dev_lo = rabs(out.q_lo - out.product);
  Rational dev_hi = rabs(out.q_hi - out.product);
  Rational worst = dev_lo > dev_hi ? dev_lo : dev_hi;
  out.satisfied = out.hypothesis_ok && worst <= out.bound;
  if (!out.hypothesis_ok) out.note = "hypothesis b * lambda(K) > 2 fails";
  return out;
}

NormReport norm_estimate(const MapExpr& expr, int r, int grid) {
  if (r < 1) raise(ErrorCode::BAD_ARGUMENT, "norm_estimate: order must be >= 1");
  NormReport rep;
  rep.map_id = expr->name();
  rep.r = r;

  if (const StepProfile* sp = expr->shear_profile()) {
    rep.closed_form = true;
    auto rho_max = [](int mo) {
      double mx = 0.0;
      constexpr int kScan = 4096;
      for (int i = 0; i <= kScan; ++i) {
        double x = -1.0 + 2.0 * static_cast<double>(i) / kScan;
        mx = std::max(mx, std::fabs(rho_deriv(x, mo)));
      }
      return mx;
    };
    double ba = to_double(Rational(sp->b) / Rational(sp->a));
    double scale = to_double(Rational(sp->a) / (2 * sp->eps));
    double est = 1.0, top = 0.0;
    for (int mo = 1; mo <= r; ++mo) {
      double v = ba * std::pow(scale, mo) * rho_max(mo);
      est = std::max(est, v);
      if (mo == r) top = v;
    }
    rep.estimate = est;
    rep.order_r_max = top;
    rep.paper_bound =
        to_double(Rational(sp->b) * rpow(Rational(sp->a), static_cast<unsigned>(r - 1)) /
                  rpow(sp->eps, static_cast<unsigned>(r))) *
        rho_max(r);
    return rep;
  }

  if (r > 3) raise(ErrorCode::BAD_ARGUMENT, "norm_estimate: finite differences support order <= 3 only");
  if (grid < 4) raise(ErrorCode::BAD_ARGUMENT, "norm_estimate: grid too small");
  rep.grid = grid;
  long long total = static_cast<long long>(grid) * grid;
  struct Partial {
    double o1 = 0.0, o2 = 0.0, o3 = 0.0;
    long long trans = 0, skipped = 0;
  };
  auto partials = run_chunks<Partial>(total, [&](Partial& part, long long lo, long long hi) {
    auto jet_at = [&](const TorusPoint& p, bool inv, bool& good) {
      PartialMapResult res = inv ? eval_jet_inverse(expr, p) : eval_jet(expr, p);
      good = res.tag == Tag::GOOD;
      return res.jet.deriv;
    };
    auto entry_max = [](const Mat2& m) {
      return std::max(std::max(std::fabs(m.a), std::fabs(m.b)), std::max(std::fabs(m.c), std::fabs(m.d)));
    };
    for (long long idx = lo; idx < hi; ++idx) {
      TorusPoint p{(static_cast<double>(idx / grid) + 0.5) / grid, (static_cast<double>(idx % grid) + 0.5) / grid};
      for (int dir = 0; dir < 2; ++dir) {
        bool inv = dir == 1;
        bool good = false;
        Mat2 j0;
        try {
          j0 = jet_at(p, inv, good);
        } catch (const Error&) {
          good = false;
        }
        if (!good) {
          ++part.trans;
          continue;
        }
        part.o1 = std::max(part.o1, entry_max(j0));
        if (r < 2) continue;
        double clr = expr->region_clearance(p, inv);
        double h = std::min(1e-4, clr / 8.0);
        if (h < 1e-9) {
          ++part.skipped;
          continue;
        }
        bool ok = true;
        Mat2 stencil[4];  // +theta, -theta, +r, -r
        const TorusPoint pts[4] = {TorusPoint{mod1d(p.theta + h), p.r}, TorusPoint{mod1d(p.theta - h), p.r},
                                   TorusPoint{p.theta, mod1d(p.r + h)}, TorusPoint{p.theta, mod1d(p.r - h)}};
        for (int s = 0; s < 4 && ok; ++s) {
          bool g = false;
          try {
            stencil[s] = jet_at(pts[s], inv, g);
          } catch (const Error&) {
            g = false;
          }
          ok = g;
        }
        if (!ok) {
          ++part.skipped;
          continue;
        }
        for (int axis = 0; axis < 2; ++axis) {
          const Mat2& jp = stencil[axis * 2];
          const Mat2& jm = stencil[axis * 2 + 1];
          Mat2 d1{(jp.a - jm.a) / (2 * h), (jp.b - jm.b) / (2 * h), (jp.c - jm.c) / (2 * h),
                  (jp.d - jm.d) / (2 * h)};
          part.o2 = std::max(part.o2, entry_max(d1));
          if (r >= 3) {
            Mat2 d2{(jp.a - 2 * j0.a + jm.a) / (h * h), (jp.b - 2 * j0.b + jm.b) / (h * h),
                    (jp.c - 2 * j0.c + jm.c) / (h * h), (jp.d - 2 * j0.d + jm.d) / (h * h)};
            part.o3 = std::max(part.o3, entry_max(d2));
          }
        }
      }
    }
  });
  double o1 = 0.0, o2 = 0.0, o3 = 0.0;
  long long trans = 0, skipped = 0;
  for (const auto& part : partials) {
    o1 = std::max(o1, part.o1);
    o2 = std::max(o2, part.o2);
    o3 = std::max(o3, part.o3);
    trans += part.trans;
    skipped += part.skipped;
  }
  rep.estimate = o1;
  if (r >= 2) rep.estimate = std::max(rep.estimate, o2);
  if (r >= 3) rep.estimate = std::max(rep.estimate, o3);
  rep.order_r_max = r == 1 ? o1 : (r == 2 ? o2 : o3);
  rep.skipped = skipped;
  rep.transition_fraction = static_cast<double>(trans) / static_cast<double>(2 * total);
  rep.transition_heavy = trans + skipped > total;  // more than half of 2*total evaluations
  if (rep.transition_heavy) rep.note = "over half of the grid evaluations were transition or clearance gated";
  return rep;
}

}  // namespace abc
