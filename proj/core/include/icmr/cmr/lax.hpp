#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icmr/cmr/geometry.hpp"
#include "icmr/cmr/report.hpp"
#include "icmr/cmr/types.hpp"

namespace icmr::cmr {

class LaxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// |midpoint(mv1, mv2) - apex| in mm. Throws LaxError naming a missing point.
double lv_length(const LandmarkSet& set, const wire::ImageHeader& h);

struct LaxViewReport {
  View view = View::kCh4;
  std::vector<double> trigger_times_ms;  // sorted
  std::vector<std::uint16_t> phases;     // phase_idx per curve entry
  std::vector<double> length_mm;
  std::vector<double> shortening_percent;  // 100 (L_ED - L) / L_ED
  std::size_t ed = 0;                      // index into the curve
  std::size_t es = 0;
  double gls_percent = 0.0;
  double mapse_mm = 0.0;
  std::optional<double> tapse_mm;  // CH4 with tv_lat only
};

// Needs >= 2 sets of one view. Sets are ordered by trigger time first.
LaxViewReport lax_biomarkers(std::vector<LandmarkSet> sets, const wire::ImageHeader& h);

// LAX landmarks in patient space, kept in the session store for the SAX
// valve plane ("lax_landmarks" artifact).
struct LaxGeometry {
  struct Entry {
    View view = View::kCh4;
    std::uint16_t phase_idx = 0;
    double trigger_time_ms = 0.0;
    std::map<std::string, Vec3> points;
  };
  std::vector<Entry> entries;

  static LaxGeometry from_sets(const std::vector<LandmarkSet>& sets, const wire::ImageHeader& h);
  // Entry of `view` closest in trigger time, or nullptr.
  const Entry* nearest(View view, double trigger_time_ms) const;

  std::string serialize() const;
  static LaxGeometry parse(const std::string& text);
};

// Adds tables "lax_ch4"/"lax_ch2" and curves "lv_length"/"gl_shortening".
void add_lax_to_report(const LaxViewReport& view, ReportDocument& doc);

}  // namespace icmr::cmr
