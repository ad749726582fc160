#include "report_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <utility>

#include <abc/errors.hpp>
#include <abc/sha256.hpp>

#ifndef ABC_VERSION
#define ABC_VERSION "0.0.0"
#endif

namespace abc::cli {
namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

ojson to_json(const Rational& r) { return to_string(r); }

ojson to_json(const StageParams& s) {
  ojson j;
  j["n"] = s.n;
  j["k"] = s.k.str();
  j["l"] = s.l.str();
  j["q"] = s.q.str();
  j["p"] = s.p.str();
  j["sigma"] = to_json(s.sigma);
  j["alpha"] = to_json(s.alpha());
  j["shear_a"] = s.shear_a.str();
  j["shear_b"] = s.shear_b.str();
  j["shear_eps"] = to_json(s.shear_eps);
  j["rot_cols"] = s.rot_cols.str();
  j["rot_cells"] = s.rot_cells.str();
  j["rot_grid"] = s.rot_grid.str();
  j["rot_eps"] = to_json(s.rot_eps);
  j["phiA_lambda"] = s.phiA_lambda.str();
  j["phiA_mu"] = s.phiA_mu.str();
  j["phiA_eps"] = to_json(s.phiA_eps);
  j["phiA_eps2"] = to_json(s.phiA_eps2);
  j["approx_d"] = to_json(s.approx_d);
  j["approx_eps"] = to_json(s.approx_eps);
  return j;
}

ojson to_json(const ConditionReport& c) {
  ojson j;
  j["n"] = c.n;
  ojson entries = ojson::array();
  for (const ConditionEntry& e : c.entries) {
    ojson q;
    q["name"] = e.name;
    q["satisfied"] = e.satisfied;
    q["lhs"] = e.lhs.exact ? to_json(e.lhs.value) : ojson(e.lhs.estimate);
    q["rhs"] = e.rhs.exact ? to_json(e.rhs.value) : ojson(e.rhs.estimate);
    q["exact"] = e.lhs.exact && e.rhs.exact;
    if (!e.note.empty()) q["note"] = e.note;
    entries.push_back(std::move(q));
  }
  j["entries"] = std::move(entries);
  return j;
}

ojson to_json(const CellIndex& c) {
  const auto ll = [](const Int& v) { return static_cast<long long>(v); };
  ojson j;
  j["level"] = to_string(c.level);
  j["u0"] = ll(c.u0);
  switch (c.level) {
    case Level::ZETA:
      j["u1"] = ll(c.u1);
      j["u2"] = ll(c.u2);
      j["u3"] = ll(c.u3);
      j["u4"] = ll(c.u4);
      j["v0"] = ll(c.v0);
      j["v1"] = ll(c.v1);
      j["v2"] = ll(c.v2);
      break;
    case Level::ETA:
      j["u1"] = ll(c.u1);
      j["u2"] = ll(c.u2);
      j["v0"] = ll(c.v0);
      break;
    case Level::TILDE_ETA:
      j["v0"] = ll(c.v0);
      break;
    case Level::HAT_ETA:
      j["v0"] = ll(c.v0);
      j["j"] = ll(c.j);
      break;
  }
  return j;
}

ojson to_json(const CoverageReport& c) {
  ojson j;
  j["level"] = to_string(c.level);
  j["cell_count"] = c.cell_count.str();
  j["total_measure"] = to_json(c.total_measure);
  j["bound"] = to_json(c.bound);
  j["satisfied"] = c.satisfied;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

ojson to_json(const DeviationReport& d) {
  ojson j;
  j["cell"] = to_json(d.cell);
  j["dev"] = d.dev;
  j["samples"] = d.samples;
  j["good_samples"] = d.good_samples;
  j["good_fraction"] = d.good_fraction;
  j["angles"] = d.angles;
  j["seed"] = d.seed;
  return j;
}

ojson to_json(const DistributionReport& d) {
  ojson j;
  j["element"] = to_json(d.element);
  j["n"] = d.n;
  j["gamma"] = d.gamma;
  j["delta"] = d.delta;
  j["eps1"] = d.eps1;
  j["eps2"] = d.eps2;
  j["gamma_target"] = to_json(d.gamma_target);
  j["delta_target"] = to_json(d.delta_target);
  j["eps1_target"] = to_json(d.eps1_target);
  j["eps2_target"] = to_json(d.eps2_target);
  j["shift_law_fraction"] = d.shift_law_fraction;
  j["transition_fraction"] = d.transition_fraction;
  j["gap_fraction"] = d.gap_fraction;
  j["loss_budget"] = d.loss_budget;
  j["delta_se"] = d.delta_se;
  j["satisfied_within_budget"] = d.satisfied_within_budget;
  j["samples_per_piece"] = d.samples_per_piece;
  j["min_good"] = d.min_good;
  j["seed"] = d.seed;
  if (!d.note.empty()) j["note"] = d.note;
  return j;
}

ojson to_json(const MixingReport& m) {
  ojson j;
  ojson pairs = ojson::array();
  for (const MixingPairResult& p : m.pairs) {
    ojson q;
    q["gamma_index"] = p.gamma_index;
    q["square_index"] = p.square_index;
    q["mu_gamma"] = to_json(p.mu_gamma);
    q["mu_c"] = to_json(p.mu_c);
    q["p_joint"] = p.p_joint;
    q["product"] = p.product;
    q["correlation"] = p.correlation;
    q["std_error"] = p.std_error;
    q["in_gamma"] = p.in_gamma;
    q["included"] = p.included;
    q["hits"] = p.hits;
    q["excluded"] = p.excluded;
    q["loss_fraction"] = p.loss_fraction;
    q["shift_law_fraction"] = p.shift_law_fraction;
    pairs.push_back(std::move(q));
  }
  j["pairs"] = std::move(pairs);
  j["samples_per_pair"] = m.samples_per_pair;
  j["max_correlation"] = m.max_correlation;
  j["shift_law_fraction"] = m.shift_law_fraction;
  j["loss_budget"] = m.loss_budget;
  j["loss_cap"] = m.loss_cap;
  j["seed"] = m.seed;
  if (!m.note.empty()) j["note"] = m.note;
  return j;
}

ojson to_json(const ApproxReport& a) {
  ojson j;
  j["target"] = a.target;
  j["degree"] = a.degree;
  j["scheme"] = to_string(a.scheme);
  j["grid"] = a.grid;
  j["d0"] = a.d0;
  j["d1"] = a.d1;
  j["d2"] = a.d2;
  ojson strips = ojson::array();
  for (const auto& [rho, bound] : a.strip_bounds) {
    ojson s;
    s["rho"] = rho;
    s["bound"] = bound;
    strips.push_back(std::move(s));
  }
  j["strip_bounds"] = std::move(strips);
  j["eps_target"] = to_json(a.eps_target);
  j["satisfied"] = a.satisfied;
  return j;
}

void write_jsonl(const std::string& path, const std::vector<ojson>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) raise(ErrorCode::BAD_ARGUMENT, "cannot write " + path);
  for (const ojson& r : records) os << r.dump() << "\n";
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) raise(ErrorCode::BAD_ARGUMENT, "cannot write " + path);
  os << body;
}

std::string svg_boxes(const std::vector<SvgBox>& boxes) {
  if (boxes.size() > 100000) raise(ErrorCode::BAD_ARGUMENT, "svg: too many boxes (limit 100000)");
  std::string out;
  out.reserve(boxes.size() * 96 + 256);
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1000 1000\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"1000\" fill=\"white\"/>\n";
  for (const SvgBox& b : boxes) {
    const double x = b.x_lo * 1000.0;
    const double y = (1.0 - b.y_hi) * 1000.0;
    const double w = (b.x_hi - b.x_lo) * 1000.0;
    const double h = (b.y_hi - b.y_lo) * 1000.0;
    out += "<rect x=\"" + fixed6(x) + "\" y=\"" + fixed6(y) + "\" width=\"" + fixed6(w) + "\" height=\"" + fixed6(h) +
           "\" fill=\"none\" stroke=\"black\" stroke-width=\"0.2\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string svg_dots(const std::vector<SvgDot>& dots) {
  if (dots.size() > 100000) raise(ErrorCode::BAD_ARGUMENT, "svg: too many points (limit 100000)");
  static const char* kColors[] = {"black", "red", "blue", "green"};
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1000 1000\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"1000\" fill=\"white\"/>\n";
  for (const SvgDot& d : dots) {
    const double x = d.x * 1000.0;
    const double y = (1.0 - d.y) * 1000.0;
    out += "<circle cx=\"" + fixed6(x) + "\" cy=\"" + fixed6(y) + "\" r=\"1.500000\" fill=\"" +
           kColors[d.cls & 3] + "\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

Manifest::Manifest(std::string out_dir, std::string subcommand, std::string config_digest)
    : out_dir_(std::move(out_dir)), subcommand_(std::move(subcommand)), config_digest_(std::move(config_digest)) {}

void Manifest::add(const std::string& filename) { files_.push_back(filename); }

void Manifest::write(double wall_ms) const {
  ojson j;
  j["artifact_version"] = ABC_VERSION;
  j["subcommand"] = subcommand_;
  j["config_sha256"] = config_digest_;
  j["wall_ms"] = wall_ms;
  std::vector<std::string> names = files_;
  std::sort(names.begin(), names.end());
  ojson files = ojson::array();
  for (const std::string& f : names) {
    ojson e;
    e["name"] = f;
    e["sha256"] = sha256_file_hex(out_dir_ + "/" + f);
    files.push_back(std::move(e));
  }
  j["files"] = std::move(files);
  write_text(out_dir_ + "/manifest.json", j.dump(2) + "\n");
}

}  // namespace abc::cli
