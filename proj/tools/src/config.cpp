#include "config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

#include <abc/errors.hpp>
#include <abc/sha256.hpp>

namespace abc::cli {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  raise(ErrorCode::BAD_CONFIG, "config " + path + ": " + what);
}

void check_keys(const json& o, const std::string& path, std::initializer_list<const char*> allowed) {
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) bad(path + "/" + it.key(), "unknown key");
  }
}

long long get_int(const json& o, const std::string& path, const char* key, long long fallback) {
  if (!o.contains(key)) return fallback;
  const json& v = o.at(key);
  if (!v.is_number_integer()) bad(path + "/" + key, "expected an integer");
  return v.get<long long>();
}

double get_num(const json& o, const std::string& path, const char* key, double fallback) {
  if (!o.contains(key)) return fallback;
  const json& v = o.at(key);
  if (!v.is_number()) bad(path + "/" + key, "expected a number");
  return v.get<double>();
}

Rational get_rational(const json& o, const std::string& path, const char* key, const Rational& fallback) {
  if (!o.contains(key)) return fallback;
  const json& v = o.at(key);
  if (v.is_number_integer()) return Rational(Int(v.get<long long>()));
  if (!v.is_string()) bad(path + "/" + key, "expected \"num/den\" or an integer");
  try {
    return parse_rational(v.get<std::string>());
  } catch (const std::exception& e) {
    bad(path + "/" + key, e.what());
  }
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad(path, "cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string raw = buf.str();

  json root;
  try {
    root = json::parse(raw);
  } catch (const json::parse_error& e) {
    bad(path, e.what());
  }
  if (!root.is_object()) bad(path, "top level must be an object");
  check_keys(root, path,
             {"stages", "mode", "float_or_exact", "seed", "out", "samples", "tolerances", "elements", "loss_cap",
              "approx", "orbit"});

  RunConfig cfg;
  cfg.config_digest = sha256_hex(raw);

  if (root.contains("mode")) {
    const std::string m = root.at("mode").is_string() ? root.at("mode").get<std::string>() : std::string();
    if (m == "STRICT")
      cfg.strict = true;
    else if (m == "RELAXED")
      cfg.strict = false;
    else
      bad(path + "/mode", "expected STRICT or RELAXED");
  }
  if (root.contains("float_or_exact")) {
    const std::string m =
        root.at("float_or_exact").is_string() ? root.at("float_or_exact").get<std::string>() : std::string();
    if (m == "EXACT")
      cfg.exact_mode = true;
    else if (m == "FLOAT")
      cfg.exact_mode = false;
    else
      bad(path + "/float_or_exact", "expected FLOAT or EXACT");
  }
  {
    long long s = get_int(root, path, "seed", 42);
    if (s < 0) bad(path + "/seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (root.contains("out")) {
    if (!root.at("out").is_string()) bad(path + "/out", "expected a string");
    cfg.out = root.at("out").get<std::string>();
  }

  if (!root.contains("stages") || !root.at("stages").is_array() || root.at("stages").empty())
    bad(path + "/stages", "must be a nonempty array");
  for (std::size_t i = 0; i < root.at("stages").size(); ++i) {
    const json& s = root.at("stages").at(i);
    const std::string sp = path + "/stages[" + std::to_string(i) + "]";
    if (!s.is_object()) bad(sp, "expected an object");
    check_keys(s, sp, {"n", "k", "l", "q", "p", "sigma"});
    for (const char* req : {"n", "k", "l", "q", "p", "sigma"})
      if (!s.contains(req)) bad(sp + "/" + req, "missing");
    const int n = static_cast<int>(get_int(s, sp, "n", 0));
    const Int k = Int(get_int(s, sp, "k", 0));
    const Int l = Int(get_int(s, sp, "l", 0));
    const Int q = Int(get_int(s, sp, "q", 0));
    const Int p = Int(get_int(s, sp, "p", 0));
    const Rational sigma = get_rational(s, sp, "sigma", Rational(0));
    try {
      cfg.stages.push_back(derive_stage(n, k, l, q, p, sigma, cfg.strict));
    } catch (const Error& e) {
      bad(sp, e.what());
    }
  }

  if (root.contains("samples")) {
    const json& s = root.at("samples");
    const std::string sp = path + "/samples";
    if (!s.is_object()) bad(sp, "expected an object");
    check_keys(s, sp,
               {"area", "commute", "isometry_cells", "isometry_samples", "isometry_angles", "jacobian", "shiftlaw",
                "distribution", "mixing", "orbit_iterates"});
    SampleBudgets& b = cfg.samples;
    b.area = get_int(s, sp, "area", b.area);
    b.commute = get_int(s, sp, "commute", b.commute);
    b.isometry_cells = static_cast<int>(get_int(s, sp, "isometry_cells", b.isometry_cells));
    b.isometry_samples = static_cast<int>(get_int(s, sp, "isometry_samples", b.isometry_samples));
    b.isometry_angles = static_cast<int>(get_int(s, sp, "isometry_angles", b.isometry_angles));
    b.jacobian = get_int(s, sp, "jacobian", b.jacobian);
    b.shiftlaw = get_int(s, sp, "shiftlaw", b.shiftlaw);
    b.distribution = get_int(s, sp, "distribution", b.distribution);
    b.mixing = get_int(s, sp, "mixing", b.mixing);
    b.orbit_iterates = static_cast<int>(get_int(s, sp, "orbit_iterates", b.orbit_iterates));
    for (long long v : {b.area, b.commute, static_cast<long long>(b.isometry_cells),
                        static_cast<long long>(b.isometry_samples), static_cast<long long>(b.isometry_angles),
                        b.jacobian, b.shiftlaw, b.distribution, b.mixing, static_cast<long long>(b.orbit_iterates)})
      if (v <= 0) bad(sp, "all sample budgets must be positive");
  }

  if (root.contains("tolerances")) {
    const json& s = root.at("tolerances");
    const std::string sp = path + "/tolerances";
    if (!s.is_object()) bad(sp, "expected an object");
    check_keys(s, sp, {"area", "commute", "isometry", "jacobian"});
    cfg.tol.area = get_num(s, sp, "area", cfg.tol.area);
    cfg.tol.commute = get_num(s, sp, "commute", cfg.tol.commute);
    cfg.tol.isometry = get_num(s, sp, "isometry", cfg.tol.isometry);
    cfg.tol.jacobian = get_num(s, sp, "jacobian", cfg.tol.jacobian);
  }

  if (root.contains("elements")) {
    const json& arr = root.at("elements");
    const std::string sp = path + "/elements";
    if (!arr.is_array()) bad(sp, "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& e = arr.at(i);
      const std::string ep = sp + "[" + std::to_string(i) + "]";
      if (!e.is_object()) bad(ep, "expected an object");
      check_keys(e, ep, {"u0", "v0", "j"});
      ElementChoice ec;
      ec.u0 = get_int(e, ep, "u0", 0);
      ec.v0 = get_int(e, ep, "v0", -1);
      ec.j = get_int(e, ep, "j", 0);
      cfg.elements.push_back(ec);
    }
  }

  cfg.loss_cap = get_num(root, path, "loss_cap", cfg.loss_cap);
  if (cfg.loss_cap <= 0.0 || cfg.loss_cap > 1.0) bad(path + "/loss_cap", "must be in (0, 1]");

  if (root.contains("approx")) {
    const json& a = root.at("approx");
    const std::string sp = path + "/approx";
    if (!a.is_object()) bad(sp, "expected an object");
    check_keys(a, sp, {"profile", "degrees", "grid", "rho", "eps_target"});
    if (a.contains("profile")) {
      if (!a.at("profile").is_string()) bad(sp + "/profile", "expected a string");
      cfg.approx.profile = a.at("profile").get<std::string>();
      if (cfg.approx.profile != "exemplar" && cfg.approx.profile != "stage")
        bad(sp + "/profile", "expected exemplar or stage");
    }
    if (a.contains("degrees")) {
      if (!a.at("degrees").is_array() || a.at("degrees").empty()) bad(sp + "/degrees", "expected a nonempty array");
      cfg.approx.degrees.clear();
      for (const json& d : a.at("degrees")) {
        if (!d.is_number_integer() || d.get<long long>() < 1) bad(sp + "/degrees", "entries must be integers >= 1");
        cfg.approx.degrees.push_back(static_cast<int>(d.get<long long>()));
      }
    }
    cfg.approx.grid = static_cast<int>(get_int(a, sp, "grid", cfg.approx.grid));
    if (cfg.approx.grid < 8) bad(sp + "/grid", "must be >= 8");
    cfg.approx.rho = get_rational(a, sp, "rho", cfg.approx.rho);
    cfg.approx.eps_target = get_rational(a, sp, "eps_target", cfg.approx.eps_target);
  }

  if (root.contains("orbit")) {
    const json& o = root.at("orbit");
    const std::string sp = path + "/orbit";
    if (!o.is_object()) bad(sp, "expected an object");
    check_keys(o, sp, {"theta", "r", "t"});
    cfg.orbit.theta = get_rational(o, sp, "theta", cfg.orbit.theta);
    cfg.orbit.r = get_rational(o, sp, "r", cfg.orbit.r);
    cfg.orbit.t = get_rational(o, sp, "t", cfg.orbit.t);
  }

  return cfg;
}

}  // namespace abc::cli
