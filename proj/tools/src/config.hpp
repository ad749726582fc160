#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <abc/rational.hpp>
#include <abc/scheduler.hpp>

namespace abc::cli {

struct SampleBudgets {
  long long area = 100000;
  long long commute = 100000;
  int isometry_cells = 200;
  int isometry_samples = 100;
  int isometry_angles = 64;
  long long jacobian = 10000;
  long long shiftlaw = 20000;
  long long distribution = 2000;
  long long mixing = 20000;
  int orbit_iterates = 100;
};

struct Tolerances {
  double area = 1e-9;
  double commute = 1e-12;
  double isometry = 1e-9;
  double jacobian = 1e-5;
};

// v0 < 0 picks the center slot of the v0 range (safe against the mixing-time
// defect dragging the contracted strip across a half-column boundary).
struct ElementChoice {
  long long u0 = 0;
  long long v0 = -1;
  long long j = 0;
};

struct ApproxConfig {
  std::string profile = "exemplar";  // exemplar (a=4,b=3,eps=1/16) or stage
  std::vector<int> degrees{16, 32, 64};
  int grid = 512;
  Rational rho = Rational(1, 10);
  Rational eps_target = Rational(1, 10);
};

struct OrbitConfig {
  Rational theta = Rational(33, 100);
  Rational r = Rational(21, 100);
  Rational t = Rational(1, 10);
};

struct RunConfig {
  std::vector<StageParams> stages;  // derived from the config tuples
  bool strict = false;
  bool exact_mode = false;
  std::uint64_t seed = 42;
  std::string out = "out";
  SampleBudgets samples;
  Tolerances tol;
  std::vector<ElementChoice> elements;  // empty: one default element
  double loss_cap = 0.9;
  ApproxConfig approx;
  OrbitConfig orbit;
  std::string config_digest;  // sha256 of the config file bytes
};

// Parses and validates the JSON config. Unknown keys are rejected with their
// path; all scalar fields have the documented defaults. Raises BAD_CONFIG.
RunConfig load_config(const std::string& path);

}  // namespace abc::cli
