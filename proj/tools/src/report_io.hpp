#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include <abc/analytic.hpp>
#include <abc/diagnostics.hpp>
#include <abc/partitions.hpp>
#include <abc/scheduler.hpp>

namespace abc::cli {

using ojson = nlohmann::ordered_json;

// Exact rationals serialize as "num/den" strings; everything else uses the
// library's shortest round-trip float form, which is byte-stable.
ojson to_json(const Rational& r);
ojson to_json(const StageParams& s);
ojson to_json(const ConditionReport& c);
ojson to_json(const CellIndex& c);
ojson to_json(const CoverageReport& c);
ojson to_json(const DeviationReport& d);
ojson to_json(const DistributionReport& d);
ojson to_json(const MixingReport& m);
ojson to_json(const ApproxReport& a);

// One compact record per line, newline-terminated, insertion-ordered keys.
void write_jsonl(const std::string& path, const std::vector<ojson>& records);
void write_text(const std::string& path, const std::string& body);

struct SvgBox {
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
};

struct SvgDot {
  double x = 0, y = 0;
  int cls = 0;
};

// Fixed 1000x1000 viewbox, 6-decimal coordinates, y up. Rejects more than
// 100000 primitives (BAD_ARGUMENT).
std::string svg_boxes(const std::vector<SvgBox>& boxes);
std::string svg_dots(const std::vector<SvgDot>& dots);

// Collects output files for one subcommand run and writes manifest.json
// (config digest, artifact version, file digests, wall time). The manifest is
// the only output carrying timing, so reports stay byte-reproducible.
class Manifest {
 public:
  Manifest(std::string out_dir, std::string subcommand, std::string config_digest);
  void add(const std::string& filename);  // relative to out_dir
  void write(double wall_ms) const;

 private:
  std::string out_dir_;
  std::string subcommand_;
  std::string config_digest_;
  std::vector<std::string> files_;
};

}  // namespace abc::cli
