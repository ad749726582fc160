#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include <abc/analytic.hpp>
#include <abc/conjugation.hpp>
#include <abc/diagnostics.hpp>
#include <abc/errors.hpp>
#include <abc/map_core.hpp>
#include <abc/partitions.hpp>
#include <abc/rng.hpp>
#include <abc/scheduler.hpp>
#include <abc/step_profile.hpp>

#include "config.hpp"
#include "report_io.hpp"

namespace {

using namespace abc;
using namespace abc::cli;

struct CliArgs {
  std::string config_path;
  std::string out_override;
  std::string suite = "all";
  std::string what;
  long long seed_override = -1;
  long long samples_override = -1;
  int stage_override = -1;
  int degree_override = -1;
};

RunConfig load(const CliArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  if (!args.out_override.empty()) cfg.out = args.out_override;
  if (args.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed_override);
  return cfg;
}

const StageParams& pick_stage(const RunConfig& cfg, int stage_override) {
  if (stage_override < 0) return cfg.stages.front();
  for (const StageParams& s : cfg.stages)
    if (s.n == stage_override) return s;
  raise(ErrorCode::BAD_CONFIG, "no stage with n=" + std::to_string(stage_override) + " in config");
}

AssembledStage assemble_one(const StageParams& st) {
  NextAlpha na = next_alpha(st);
  MixingTime mt = mixing_time(st.q, na.q, na.p);
  return assemble_stage(st, na.alpha, mt, nullptr);
}

CellIndex hat_element(const StageParams& st, const ElementChoice& e);

long long center_safe_v0(const StageParams& st) {
  // center of the v0 range; keeps the contracted strip clear of half-column
  // boundaries for any |frak_a| <= 1/(2 q_{n+1}) * k^6-ish drift
  const Int c = ipow(st.k, 5) / 2;
  return static_cast<long long>(c);
}

std::filesystem::path ensure_out(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------- assertions

struct Assertion {
  std::string suite;
  std::string name;
  bool pass = false;
  double value = 0.0;
  double bound = 0.0;
  std::string note;
};

ojson to_json(const Assertion& a) {
  ojson j;
  j["suite"] = a.suite;
  j["name"] = a.name;
  j["pass"] = a.pass;
  j["value"] = a.value;
  j["bound"] = a.bound;
  if (!a.note.empty()) j["note"] = a.note;
  return j;
}

void suite_area(const RunConfig& cfg, const StageParams& st, const AssembledStage& a, std::vector<Assertion>& out) {
  struct Target {
    const char* name;
    MapExpr map;
    bool good_only;
  };
  const std::vector<Target> targets = {
      {"shear_det", shear_map(st), false},
      {"rotation_block_det", typeB_map(st), false},
      {"phi_det", a.phi, true},
      {"f_det", a.f, true},
  };
  Rng rng{cfg.seed};
  for (const Target& t : targets) {
    double worst = 0.0;
    long long counted = 0;
    for (long long i = 0; i < cfg.samples.area; ++i) {
      TorusPoint p{rng.uniform(rng.at(i, 0)), rng.uniform(rng.at(i, 1))};
      PartialMapResult r = eval_jet(t.map, p);
      if (t.good_only && r.tag != Tag::GOOD) continue;
      ++counted;
      worst = std::max(worst, std::fabs(r.jet.deriv.det() - 1.0));
    }
    Assertion as;
    as.suite = "area";
    as.name = t.name;
    as.value = worst;
    as.bound = cfg.tol.area;
    as.pass = counted > 0 && worst <= cfg.tol.area;
    as.note = std::to_string(counted) + "/" + std::to_string(cfg.samples.area) + " counted";
    out.push_back(std::move(as));
  }
}

void suite_commute(const RunConfig& cfg, const StageParams& st, std::vector<Assertion>& out) {
  MapExpr g = shear_map(st);
  MapExpr rot = rotation_map(Rational(1, st.q));
  Rng rng{cfg.seed + 1};
  double worst = 0.0;
  for (long long i = 0; i < cfg.samples.commute; ++i) {
    TorusPoint p{rng.uniform(rng.at(i, 0)), rng.uniform(rng.at(i, 1))};
    TorusPoint gr = eval_jet(g, eval_jet(rot, p).jet.point).jet.point;
    TorusPoint rg = eval_jet(rot, eval_jet(g, p).jet.point).jet.point;
    worst = std::max(worst, std::max(std::fabs(circ_diff(gr.theta, rg.theta)), std::fabs(circ_diff(gr.r, rg.r))));
  }
  Assertion as;
  as.suite = "commute";
  as.name = "shear_vs_R_1_over_q";
  as.value = worst;
  as.bound = cfg.tol.commute;
  as.pass = worst <= cfg.tol.commute;
  out.push_back(std::move(as));

  // exact-arithmetic spot check on rational points
  bool exact_ok = true;
  Rng rng2{cfg.seed + 2};
  for (long long i = 0; i < 64 && exact_ok; ++i) {
    RatPoint p{rng2.uniform_rational(rng2.at(i, 0)), rng2.uniform_rational(rng2.at(i, 1))};
    ExactMapResult gr = eval_exact(g, eval_exact(rot, p).point);
    ExactMapResult rg = eval_exact(rot, eval_exact(g, p).point);
    if (!gr.representable || !rg.representable || !(gr.point.theta == rg.point.theta) ||
        !(gr.point.r == rg.point.r))
      exact_ok = false;
  }
  Assertion ex;
  ex.suite = "commute";
  ex.name = "shear_vs_R_1_over_q_exact";
  ex.value = exact_ok ? 0.0 : 1.0;
  ex.bound = 0.0;
  ex.pass = exact_ok;
  ex.note = "64 rational points, exact equality";
  out.push_back(std::move(ex));
}

// farthest endpoint offset of a digit slot from the cell center, in units of
// 1/(2 k^5); the (u4, v2) sub-box lies inside the inner rotation disc iff
// 625 (d_theta^2 + d_r^2) <= 441 k^10
Int slot_offset(const Int& slot, const Int& c5) {
  Int lo = 2 * slot - c5;
  Int hi = 2 * (slot + 1) - c5;
  if (lo < 0) lo = -lo;
  if (hi < 0) hi = -hi;
  return lo > hi ? lo : hi;
}

CellIndex draw_good_cell(const StageParams& st, Rng& rng, long long base, long long& counter) {
  const Int c5 = ipow(st.k, 5);
  const long long k5 = static_cast<long long>(c5);
  const long long two_q = static_cast<long long>(2 * st.q);
  const long long kk = static_cast<long long>(st.k);
  const long long v1_lo = two_q;
  const long long v1_hi = static_cast<long long>(2 * ipow(st.k, 6) * st.q - 2 * st.q - 1);
  const Int limit = 441 * ipow(st.k, 10);
  while (true) {
    const long long c = counter++;
    CellIndex cell;
    cell.level = Level::ZETA;
    cell.u0 = static_cast<long long>(rng.bits(base + c * 16 + 0) % static_cast<std::uint64_t>(two_q));
    cell.u1 = static_cast<long long>(rng.bits(base + c * 16 + 1) % static_cast<std::uint64_t>(kk));
    cell.u2 = 1 + static_cast<long long>(rng.bits(base + c * 16 + 2) % static_cast<std::uint64_t>(k5 - 2));
    cell.u3 = 1 + static_cast<long long>(rng.bits(base + c * 16 + 3) % static_cast<std::uint64_t>(k5 - 2));
    cell.u4 = 1 + static_cast<long long>(rng.bits(base + c * 16 + 4) % static_cast<std::uint64_t>(k5 - 2));
    cell.v0 = 1 + static_cast<long long>(rng.bits(base + c * 16 + 5) % static_cast<std::uint64_t>(k5 - 2));
    cell.v1 = v1_lo + static_cast<long long>(rng.bits(base + c * 16 + 6) %
                                             static_cast<std::uint64_t>(v1_hi - v1_lo + 1));
    cell.v2 = 1 + static_cast<long long>(rng.bits(base + c * 16 + 7) % static_cast<std::uint64_t>(k5 - 2));
    Int dt = slot_offset(cell.u4, c5);
    Int dr = slot_offset(cell.v2, c5);
    if (625 * (dt * dt + dr * dr) <= limit) return cell;
  }
}

void suite_isometry(const RunConfig& cfg, const StageParams& st, const AssembledStage& a,
                    std::vector<Assertion>& out) {
  PartitionScheme parts(st);
  Rng rng{cfg.seed + 3};
  long long counter = 0;
  double worst = 0.0;
  double min_good = 1.0;
  int checked = 0;
  for (int c = 0; c < cfg.samples.isometry_cells; ++c) {
    CellIndex cell = draw_good_cell(st, rng, 1 << 20, counter);
    CellBox box = parts.box(cell);
    TorusPoint center{to_double((box.theta_lo + box.theta_hi) / 2), to_double((box.r_lo + box.r_hi) / 2)};
    if (eval_jet(a.h, center).tag != Tag::GOOD) continue;  // shear collar hit: skip, next draw
    DeviationReport dr = deviation(parts, a.h, cell, cfg.samples.isometry_samples, cfg.samples.isometry_angles,
                                   cfg.seed + static_cast<std::uint64_t>(c));
    worst = std::max(worst, dr.dev);
    min_good = std::min(min_good, dr.good_fraction);
    ++checked;
  }
  Assertion as;
  as.suite = "isometry";
  as.name = "dev_on_good_cells";
  as.value = worst;
  as.bound = cfg.tol.isometry;
  as.pass = checked >= cfg.samples.isometry_cells * 9 / 10 && worst <= cfg.tol.isometry;
  as.note = std::to_string(checked) + " cells, min good fraction " + std::to_string(min_good);
  out.push_back(std::move(as));
}

void suite_partition(std::vector<Assertion>& out) {
  for (long long k : {2, 4}) {
    for (long long q : {1, 2}) {
      StageParams st = derive_stage(1, Int(k), Int(1), Int(q), Int(q == 1 ? 0 : 1), Rational(3, 8), false);
      PartitionScheme parts(st);
      for (Level lv : {Level::ETA, Level::ZETA, Level::TILDE_ETA, Level::HAT_ETA}) {
        CoverageReport cr = parts.coverage(lv);
        Assertion as;
        as.suite = "partition";
        as.name = "coverage_" + to_string(lv) + "_k" + std::to_string(k) + "_q" + std::to_string(q);
        as.value = to_double(cr.total_measure);
        as.bound = to_double(cr.bound);
        as.pass = cr.satisfied && cr.total_measure >= cr.bound;
        out.push_back(std::move(as));
      }
      if (k == 2 && q == 1) {
        CoverageReport cr = parts.coverage(Level::ETA);
        Rational expect = Rational(3600) * Rational(1023, 131072) * Rational(1023, 32768);
        Assertion as;
        as.suite = "partition";
        as.name = "eta_measure_exact_k2_q1";
        as.value = to_double(cr.total_measure);
        as.bound = to_double(expect);
        as.pass = cr.total_measure == expect;
        as.note = "exact rational equality";
        out.push_back(std::move(as));
      }
    }
  }
}

// The tangent shift law is scoped to the columns where phi acts: on even
// half-columns a GOOD point in column u1 has its fiber translated by exactly
// u1/k. For Phi the law is checked piecewise on a hat-element, where the
// contraction of the even-source pieces makes it integer-exact.
void suite_shiftlaw(const RunConfig& cfg, const StageParams& st, const AssembledStage& a,
                    std::vector<Assertion>& out) {
  const long long kk = static_cast<long long>(st.k);
  const long long cols = static_cast<long long>(2 * st.k * st.q);
  const long long halves = static_cast<long long>(2 * st.q);
  {
    Rng rng{cfg.seed + 4};
    long long good = 0, lawful = 0;
    for (long long i = 0; i < cfg.samples.shiftlaw; ++i) {
      ProjPoint p;
      p.point.theta = rng.uniform(rng.at(i, 0));
      p.point.r = rng.uniform(rng.at(i, 1));
      p.t = rng.uniform(rng.at(i, 2));
      const long long u0 = static_cast<long long>(p.point.theta * static_cast<double>(halves)) % halves;
      if (u0 % 2 != 0) continue;
      const long long u1 = static_cast<long long>(p.point.theta * static_cast<double>(cols)) % kk;
      const long long j = static_cast<long long>(p.t * static_cast<double>(kk));
      ProjResult r = eval_proj(a.phi, p);
      if (r.tag != Tag::GOOD) continue;
      ++good;
      const long long landed = static_cast<long long>(r.p.t * static_cast<double>(kk)) % kk;
      if (((u1 + j) % kk + kk) % kk == landed) ++lawful;
    }
    Assertion as;
    as.suite = "shiftlaw";
    as.name = "phi_shift_law";
    as.value = good > 0 ? static_cast<double>(lawful) / static_cast<double>(good) : 0.0;
    as.bound = 1.0;
    as.pass = good > 1000 && lawful == good;
    as.note = std::to_string(lawful) + "/" + std::to_string(good) + " good samples on even half-columns lawful";
    out.push_back(std::move(as));
  }
  {
    CellIndex elem = hat_element(st, ElementChoice{});
    const long long per_piece = std::max<long long>(500, cfg.samples.shiftlaw / (kk * kk));
    double worst = 1.0;
    long long min_good = std::numeric_limits<long long>::max();
    for (long long j = 0; j < kk; ++j) {
      elem.j = j;
      DistributionReport rep = distribution_constants(st, a.Phi, elem, per_piece, cfg.seed + 4 + j);
      worst = std::min(worst, rep.shift_law_fraction);
      min_good = std::min(min_good, rep.min_good);
    }
    Assertion as;
    as.suite = "shiftlaw";
    as.name = "Phi_shift_law";
    as.value = worst;
    as.bound = 1.0;
    as.pass = worst == 1.0 && min_good >= 100;
    as.note = "element (" + elem.u0.str() + "," + elem.v0.str() + "), all fiber indices, min good per piece " +
              std::to_string(min_good);
    out.push_back(std::move(as));
  }
}

void suite_jacobian(const RunConfig& cfg, const StageParams& st, const AssembledStage& a,
                    std::vector<Assertion>& out) {
  struct Target {
    const char* name;
    MapExpr map;
    double tol;
  };
  const std::vector<Target> targets = {
      {"shear_fd", shear_map(st), 1e-5},
      {"rotation_fd", rotation_map(st.alpha()), 1e-5},
      {"translation_block_fd", typeA_map(st), 1e-7},
      {"rotation_block_fd", typeB_map(st), 1e-6},
      {"phi_fd", a.phi, 1e-6},
  };
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    const Target& t = targets[ti];
    Rng rng{cfg.seed + 5 + ti};
    double worst = 0.0;
    long long accepted = 0;
    const long long budget = cfg.samples.jacobian;
    for (long long i = 0; accepted < budget && i < budget * 16; ++i) {
      TorusPoint p{rng.uniform(rng.at(i, 0)), rng.uniform(rng.at(i, 1))};
      const double clr = region_clearance(t.map, p);
      const double h = std::min(1e-5, clr / 8.0);
      if (h < 1e-9) continue;
      try {
        worst = std::max(worst, jacobian_fd_check(t.map, p, h));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::IN_TRANSITION || e.code() == ErrorCode::TRANSITION_AT_POINT) continue;
        throw;
      }
      ++accepted;
    }
    Assertion as;
    as.suite = "jacobian";
    as.name = t.name;
    as.value = worst;
    as.bound = std::min(t.tol, cfg.tol.jacobian);
    as.pass = accepted >= budget / 2 && worst <= as.bound;
    as.note = std::to_string(accepted) + " collar-free samples";
    out.push_back(std::move(as));
  }
}

int cmd_verify(const CliArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = load(args);
  const StageParams& st = pick_stage(cfg, args.stage_override);
  AssembledStage a = assemble_one(st);
  std::string suite = args.suite;
  std::transform(suite.begin(), suite.end(), suite.begin(), [](unsigned char c) { return std::tolower(c); });
  const bool all = suite == "all";
  std::vector<Assertion> checks;
  if (all || suite == "area") suite_area(cfg, st, a, checks);
  if (all || suite == "commute") suite_commute(cfg, st, checks);
  if (all || suite == "isometry") suite_isometry(cfg, st, a, checks);
  if (all || suite == "partition") suite_partition(checks);
  if (all || suite == "shiftlaw") suite_shiftlaw(cfg, st, a, checks);
  if (all || suite == "jacobian") suite_jacobian(cfg, st, a, checks);
  if (checks.empty()) raise(ErrorCode::BAD_CONFIG, "unknown suite: " + args.suite);

  auto dir = ensure_out(cfg);
  std::vector<ojson> records;
  bool ok = true;
  for (const Assertion& as : checks) {
    records.push_back(to_json(as));
    ok = ok && as.pass;
    std::printf("%s %s.%s value=%.6e bound=%.6e%s%s\n", as.pass ? "PASS" : "FAIL", as.suite.c_str(), as.name.c_str(),
                as.value, as.bound, as.note.empty() ? "" : " ", as.note.c_str());
  }
  write_jsonl((dir / "verify.json").string(), records);
  Manifest man(dir.string(), "verify", cfg.config_digest);
  man.add("verify.json");
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  man.write(ms);
  std::printf("%s: %zu checks\n", ok ? "OK" : "FAILURES", checks.size());
  return ok ? 0 : 3;
}

// ------------------------------------------------------------------- params

int cmd_params(const CliArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = load(args);

  // measure the norm inputs of the closeness condition; a failed estimate
  // degrades to +inf (condition reported unsatisfied, never silently passed)
  NormEstimates est;
  int max_r = 0;
  for (const StageParams& s : cfg.stages) max_r = std::max(max_r, s.n + 1);
  est.r = std::min(max_r, 3);
  {
    std::vector<AssembledStage> chain;
    chain.reserve(cfg.stages.size());
    const AssembledStage* prev = nullptr;
    for (const StageParams& s : cfg.stages) {
      NextAlpha na = next_alpha(s);
      MixingTime mt = mixing_time(s.q, na.q, na.p);
      chain.push_back(assemble_stage(s, na.alpha, mt, prev));
      prev = &chain.back();
    }
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const int n = cfg.stages[i].n;
      const double inf = std::numeric_limits<double>::infinity();
      try {
        est.dH_prev_sup[n] = i == 0 ? 1.0 : norm_estimate(chain[i - 1].H, 1, 32).estimate;
      } catch (const Error&) {
        est.dH_prev_sup[n] = inf;
      }
      try {
        est.H_norm_r[n] = norm_estimate(chain[i].H, est.r, 32).estimate;
      } catch (const Error&) {
        est.H_norm_r[n] = inf;
      }
    }
  }
  std::vector<ConditionReport> conds = check_conditions(cfg.stages, est);
  ojson j;
  ojson stages = ojson::array();
  for (const StageParams& s : cfg.stages) stages.push_back(abc::cli::to_json(s));
  j["stages"] = std::move(stages);
  ojson cj = ojson::array();
  for (const ConditionReport& c : conds) cj.push_back(abc::cli::to_json(c));
  j["conditions"] = std::move(cj);

  auto dir = ensure_out(cfg);
  write_text((dir / "params.json").string(), j.dump(2) + "\n");

  std::ostringstream csv;
  csv << "n,k,l,q,p,sigma,alpha,shear_a,shear_b,shear_eps,rot_cells\n";
  for (const StageParams& s : cfg.stages)
    csv << s.n << "," << s.k.str() << "," << s.l.str() << "," << s.q.str() << "," << s.p.str() << ","
        << to_string(s.sigma) << "," << to_string(s.alpha()) << "," << s.shear_a.str() << "," << s.shear_b.str()
        << "," << to_string(s.shear_eps) << "," << s.rot_cells.str() << "\n";
  write_text((dir / "params.csv").string(), csv.str());

  for (const ConditionReport& c : conds)
    for (const ConditionEntry& e : c.entries)
      std::printf("stage %d %s: %s\n", c.n, e.name.c_str(), e.satisfied ? "true" : "false");
  Manifest man(dir.string(), "params", cfg.config_digest);
  man.add("params.json");
  man.add("params.csv");
  man.write(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

// --------------------------------------------------------------- distribute

CellIndex hat_element(const StageParams& st, const ElementChoice& e) {
  CellIndex c;
  c.level = Level::HAT_ETA;
  c.u0 = e.u0;
  c.v0 = e.v0 >= 0 ? e.v0 : center_safe_v0(st);
  c.j = e.j;
  return c;
}

int cmd_distribute(const CliArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = load(args);
  const StageParams& st = pick_stage(cfg, args.stage_override);
  AssembledStage a = assemble_one(st);
  const long long samples = args.samples_override > 0 ? args.samples_override : cfg.samples.distribution;
  std::vector<ElementChoice> elems = cfg.elements;
  if (elems.empty()) elems.push_back(ElementChoice{});

  std::vector<ojson> records;
  std::ostringstream csv;
  csv << "u0,v0,j,map,gamma,delta,eps1,eps2,shift_law,loss_budget,satisfied\n";
  for (const ElementChoice& e : elems) {
    CellIndex elem = hat_element(st, e);
    for (const auto& [label, map] : {std::pair<const char*, const MapExpr*>{"Phi", &a.Phi},
                                     std::pair<const char*, const MapExpr*>{"identity", nullptr}}) {
      MapExpr m = map ? *map : identity_map();
      DistributionReport rep = distribution_constants(st, m, elem, samples, cfg.seed);
      ojson rj = abc::cli::to_json(rep);
      rj["map"] = label;
      records.push_back(std::move(rj));
      csv << elem.u0.str() << "," << elem.v0.str() << "," << elem.j.str() << "," << label << "," << rep.gamma << ","
          << rep.delta << "," << rep.eps1 << "," << rep.eps2 << "," << rep.shift_law_fraction << ","
          << rep.loss_budget << "," << (rep.satisfied_within_budget ? 1 : 0) << "\n";
      std::printf("%s element (%s,%s,%s): gamma=%.6f delta=%.4f satisfied=%d\n", label, elem.u0.str().c_str(),
                  elem.v0.str().c_str(), elem.j.str().c_str(), rep.gamma, rep.delta,
                  int(rep.satisfied_within_budget));
    }
  }
  auto dir = ensure_out(cfg);
  write_jsonl((dir / "distribution.jsonl").string(), records);
  write_text((dir / "distribution.csv").string(), csv.str());
  Manifest man(dir.string(), "distribute", cfg.config_digest);
  man.add("distribution.jsonl");
  man.add("distribution.csv");
  man.write(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

// ------------------------------------------------------------------- mixing

int cmd_mixing(const CliArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = load(args);
  const StageParams& st = pick_stage(cfg, args.stage_override);
  AssembledStage a = assemble_one(st);
  NextAlpha na = next_alpha(st);
  MixingTime mt = mixing_time(st.q, na.q, na.p);
  const long long samples = args.samples_override > 0 ? args.samples_override : cfg.samples.mixing;

  std::vector<ElementChoice> elems = cfg.elements;
  if (elems.empty()) elems.push_back(ElementChoice{});
  std::vector<MixingRegion> gammas;
  for (const ElementChoice& e : elems) gammas.push_back(element_region(hat_element(st, e)));
  std::vector<MixingRegion> squares;
  const long long kk = static_cast<long long>(st.k);
  for (long long j = 0; j < kk; ++j)
    squares.push_back(box_region(Rational(1, 4), Rational(1, 2), Rational(1, 4), Rational(1, 2), Rational(j, kk),
                                 Rational(j + 1, kk), true));

  // the reduced trajectory already carries the full m-step rotation inside
  // Phi, so it is pushed exactly once per sample
  MixingReport rep = mixing_correlation(st, mixing_trajectory(a), Int(1), gammas, squares, samples, cfg.seed,
                                        cfg.loss_cap);
  std::vector<ojson> records;
  ojson rj = abc::cli::to_json(rep);
  rj["m"] = mt.m.str();
  rj["frak_a"] = abc::cli::to_json(mt.frak_a);
  records.push_back(std::move(rj));
  auto dir = ensure_out(cfg);
  write_jsonl((dir / "mixing.jsonl").string(), records);
  std::printf("mixing m=%s pairs=%zu max_correlation=%.6f loss=%.4f shift_law=%.4f\n", mt.m.str().c_str(),
              rep.pairs.size(), rep.max_correlation, rep.loss_budget, rep.shift_law_fraction);
  Manifest man(dir.string(), "mixing", cfg.config_digest);
  man.add("mixing.jsonl");
  man.write(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

// ------------------------------------------------------------------- approx

int cmd_approx(const CliArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = load(args);
  const StageParams& st = pick_stage(cfg, args.stage_override);
  StepProfile sp = cfg.approx.profile == "stage" ? step_profile(st.shear_a, st.shear_b, st.shear_eps)
                                                 : step_profile(Int(4), Int(3), Rational(1, 16));
  const double quad_tol =
      cfg.approx.profile == "stage" ? std::numeric_limits<double>::infinity() : -1.0;
  MapExpr smooth = shear_map(sp);
  std::vector<int> degrees = cfg.approx.degrees;
  if (args.degree_override > 0) degrees = {args.degree_override};

  std::vector<ojson> records;
  std::string coeffs;
  for (int N : degrees) {
    TrigProfile tp = approximate_profile(sp, N, ApproxScheme::FEJER, quad_tol);
    ApproxReport rep = distance_report(smooth, analytic_shear_map(tp), cfg.approx.grid, cfg.approx.eps_target);
    const double rho = to_double(cfg.approx.rho);
    rep.strip_bounds.push_back({rho, strip_norm(tp, rho)});
    TrigProfile scaled = periodic_rescale(tp, st.q);
    ojson rj = abc::cli::to_json(rep);
    rj["rescale_commutes"] = freq_support_divisible(scaled, st.q);
    records.push_back(std::move(rj));
    std::printf("degree %d: d0=%.6e d1=%.6e d2=%.6e\n", N, rep.d0, rep.d1, rep.d2);
    if (N == degrees.back()) {
      std::ostringstream os;
      write_coefficients_csv(os, tp);
      coeffs = os.str();
    }
  }
  auto dir = ensure_out(cfg);
  write_jsonl((dir / "approx.jsonl").string(), records);
  write_text((dir / "coefficients.csv").string(), coeffs);
  Manifest man(dir.string(), "approx", cfg.config_digest);
  man.add("approx.jsonl");
  man.add("coefficients.csv");
  man.write(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

// -------------------------------------------------------------------- orbit

int cmd_orbit(const CliArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = load(args);
  const StageParams& st = pick_stage(cfg, args.stage_override);
  AssembledStage a = assemble_one(st);
  const int iters = args.samples_override > 0 ? static_cast<int>(args.samples_override) : cfg.samples.orbit_iterates;
  ProjPoint p;
  p.point.theta = to_double(cfg.orbit.theta);
  p.point.r = to_double(cfg.orbit.r);
  p.t = to_double(cfg.orbit.t);
  std::ostringstream csv;
  csv << "iterate,theta,r,t,tag\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "0,%.17g,%.17g,%.17g,GOOD\n", p.point.theta, p.point.r, p.t);
  csv << buf;
  Tag worst = Tag::GOOD;
  for (int i = 1; i <= iters; ++i) {
    ProjResult r = eval_proj(a.f, p);
    worst = worse(worst, r.tag);
    p = r.p;
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%s\n", i, p.point.theta, p.point.r, p.t,
                  worst == Tag::GOOD ? "GOOD" : "TRANSITION");
    csv << buf;
  }
  auto dir = ensure_out(cfg);
  write_text((dir / "orbit.csv").string(), csv.str());
  std::printf("orbit: %d iterates of f_%d written\n", iters, st.n);
  Manifest man(dir.string(), "orbit", cfg.config_digest);
  man.add("orbit.csv");
  man.write(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

// ------------------------------------------------------------------- render

int cmd_render(const CliArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = load(args);
  if (args.what.empty()) raise(ErrorCode::BAD_CONFIG, "render requires --what partition:<level> or orbit:<csv>");
  auto dir = ensure_out(cfg);
  std::string body;
  if (args.what.rfind("partition:", 0) == 0) {
    const std::string name = args.what.substr(10);
    Level lv;
    if (name == "eta")
      lv = Level::ETA;
    else if (name == "zeta")
      lv = Level::ZETA;
    else if (name == "tilde")
      lv = Level::TILDE_ETA;
    else if (name == "hat")
      lv = Level::HAT_ETA;
    else
      raise(ErrorCode::BAD_CONFIG, "render: unknown level " + name);
    const StageParams& st = pick_stage(cfg, args.stage_override);
    PartitionScheme parts(st);
    if (parts.count(lv) > 100000)
      raise(ErrorCode::BAD_ARGUMENT, "render: " + parts.count(lv).str() + " boxes exceed the 100000 limit");
    std::vector<SvgBox> boxes;
    parts.for_each(lv, [&](const CellIndex&, const CellBox& b) {
      boxes.push_back(SvgBox{to_double(b.theta_lo), to_double(b.theta_hi), to_double(b.r_lo), to_double(b.r_hi)});
      return true;
    });
    body = svg_boxes(boxes);
  } else if (args.what.rfind("orbit:", 0) == 0) {
    const std::string path = args.what.substr(6);
    std::ifstream in(path);
    if (!in) raise(ErrorCode::BAD_CONFIG, "render: cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<SvgDot> dots;
    while (std::getline(in, line)) {
      SvgDot d;
      double t = 0;
      char tag[32] = {0};
      long long i = 0;
      if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%31s", &i, &d.x, &d.y, &t, tag) >= 4) {
        d.cls = std::string(tag) == "GOOD" ? 0 : 1;
        dots.push_back(d);
      }
    }
    body = svg_dots(dots);
  } else {
    raise(ErrorCode::BAD_CONFIG, "render: --what must start with partition: or orbit:");
  }
  write_text((dir / "render.svg").string(), body);
  std::printf("render: wrote %s/render.svg\n", cfg.out.c_str());
  Manifest man(dir.string(), "render", cfg.config_digest);
  man.add("render.svg");
  man.write(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::BAD_CONFIG:
      return 2;
    case ErrorCode::UNDERFLOW:
    case ErrorCode::NUMERIC_UNDERFLOW:
    case ErrorCode::QUADRATURE_UNCONVERGED:
      return 4;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-stage constructor and verifier for conjugation-built torus diffeomorphisms"};
  app.require_subcommand(1);
  CliArgs args;

  auto add_common = [&](CLI::App* sub, bool need_config = true) {
    auto* opt = sub->add_option("--config", args.config_path, "JSON run configuration");
    if (need_config) opt->required();
    sub->add_option("--out", args.out_override, "output directory (overrides config)");
    sub->add_option("--seed", args.seed_override, "RNG seed (overrides config)");
    sub->add_option("--samples", args.samples_override, "sample budget for this subcommand");
    sub->add_option("--stage", args.stage_override, "stage index n (default: first stage)");
  };

  CLI::App* params = app.add_subcommand("params", "derive stage parameters and condition verdicts");
  add_common(params);
  CLI::App* verify = app.add_subcommand("verify", "run invariant suites");
  add_common(verify);
  verify->add_option("--suite", args.suite, "all|area|commute|isometry|partition|shiftlaw|jacobian");
  CLI::App* distribute = app.add_subcommand("distribute", "distribution constants of Phi on elements");
  add_common(distribute);
  CLI::App* mixing = app.add_subcommand("mixing", "mixing correlations at the scheduler mixing time");
  add_common(mixing);
  CLI::App* approx = app.add_subcommand("approx", "analytic approximation distance reports");
  add_common(approx);
  approx->add_option("--degree", args.degree_override, "single degree (overrides config sweep)");
  CLI::App* orbit = app.add_subcommand("orbit", "projectivized orbit CSV");
  add_common(orbit);
  CLI::App* render = app.add_subcommand("render", "deterministic SVG of partitions or orbits");
  add_common(render);
  render->add_option("--what", args.what, "partition:<eta|zeta|tilde|hat> or orbit:<csv path>");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (params->parsed()) return cmd_params(args);
    if (verify->parsed()) return cmd_verify(args);
    if (distribute->parsed()) return cmd_distribute(args);
    if (mixing->parsed()) return cmd_mixing(args);
    if (approx->parsed()) return cmd_approx(args);
    if (orbit->parsed()) return cmd_orbit(args);
    if (render->parsed()) return cmd_render(args);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
