#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace icmr::sim {

// key = value lines, '#' comments. Unknown keys are kept and ignored.
//   sax.edv_rel, sax.esv_rel, sax.ef_abs, sax.mass_rel
//   lax.gls_abs, lax.mapse_abs, lax.tapse_abs
//   perf.flow_abs, perf.mpr_abs, perf.ptt_abs
//   overlap.expect (1: first image before last acquisition, 0: after)
struct Tolerances {
  std::map<std::string, double> values;

  double get(const std::string& key) const;  // falls back to built-in defaults
  std::optional<double> find(const std::string& key) const;
  static Tolerances defaults();
  static Tolerances load(const std::filesystem::path& path);
};

struct Check {
  std::string name;
  std::optional<double> expected;
  std::optional<double> actual;
  std::optional<double> tolerance;
  bool pass = false;
  std::string note;
};

struct Verdict {
  std::string kind;
  std::vector<Check> checks;
  std::vector<std::string> artifacts;  // files written, relative to the run dir

  bool pass() const;
  std::string to_json() const;
  std::string summary() const;
};

struct VerifyOptions {
  bool render = true;  // PNG mosaics, curves and bullseyes
};

// Reads session.json, timing.json, report_*.json and the received capture
// from a run directory, checks them against the recorded ground truth and
// writes verdict.json, summary.txt and the PNGs into the same directory.
Verdict verify_run(const std::filesystem::path& run_dir, const Tolerances& tolerances,
                   const VerifyOptions& options = {});

}  // namespace icmr::sim
