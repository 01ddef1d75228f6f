#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "icmr/cmr/geometry.hpp"
#include "icmr/cmr/lax.hpp"
#include "icmr/cmr/report.hpp"
#include "icmr/cmr/types.hpp"

namespace icmr::cmr {

class SaxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMyocardialDensity = 1.05;  // g/mL

// Per-slice label volume in mL: count * spacing_r * spacing_c * slice_spacing / 1000.
double label_volume_ml(const SegmentationMask& mask, std::uint16_t code);

struct VolumeBreakdown {
  std::vector<double> per_slice_ml;  // 0 for excluded slices
  double total_ml = 0.0;             // sum of per_slice_ml, in order
};

// Sum over included slices of LV blood volume. `included` empty means all.
VolumeBreakdown blood_volume(const std::vector<SegmentationMask>& stack,
                             const std::vector<bool>& included = {});
VolumeBreakdown myocardium_volume(const std::vector<SegmentationMask>& stack,
                                  const std::vector<bool>& included = {});

// ED = argmax, ES = argmin, lowest index on ties.
std::pair<std::size_t, std::size_t> find_ed_es(const std::vector<double>& volumes);

struct ValvePlane {
  Vec3 point{};
  Vec3 normal{};  // unit; apex side positive

  double signed_distance(const Vec3& p) const { return dot(p - point, normal); }
};

// Least-squares plane through >= 3 points, oriented towards the apex.
ValvePlane fit_valve_plane(const std::vector<Vec3>& mitral_points, const Vec3& apex);

// Slice centre strictly on the apical side.
bool slice_included(const ValvePlane& plane, const wire::ImageHeader& h);

// Max wall thickness in mm from 360 rays cast from the LV blood centroid,
// each ray averaged with its 5 neighbours on either side.
double max_wall_thickness(const SegmentationMask& mask);

struct SaxInputs {
  // stacks[phase][slice], every phase with the same slice order
  std::vector<std::vector<SegmentationMask>> stacks;
  std::optional<LaxGeometry> lax;
  std::optional<double> heart_rate_bpm;
  std::optional<double> bsa_m2;
};

struct SaxReport {
  std::size_t ed_phase = 0;  // index into stacks
  std::size_t es_phase = 0;
  std::vector<double> uncorrected_volumes_ml;  // per phase
  double edv_ml = 0, esv_ml = 0, sv_ml = 0, ef_percent = 0, mass_g = 0, mcf_percent = 0;
  std::optional<double> co_l_min;
  std::optional<double> edvi, esvi, svi, massi, ci;
  VolumeBreakdown ed_blood, es_blood, ed_myo;  // ed_myo per-slice in mL of tissue
  std::vector<bool> included_ed, included_es;
  std::vector<std::optional<double>> wall_thickness_mm;  // per slice at ED
  std::vector<std::uint16_t> slice_idx;
  bool uncorrected_extent = false;
  std::vector<std::string> flags;
};

SaxReport sax_biomarkers(const SaxInputs& inputs);

// EF, SV, MCF and CO from already measured volumes.
struct SaxFunction {
  double ef_percent, sv_ml, mcf_percent;
  std::optional<double> co_l_min;
};
SaxFunction sax_function(double edv_ml, double esv_ml, double mass_g,
                         std::optional<double> heart_rate_bpm);

// Optional normal range lookup, keyed by biomarker name ("EDV", "EDVi", ...).
using NormalRanges = std::map<std::string, std::pair<double, double>>;

// Tables "sax_function" and "sax_slices".
void add_sax_to_report(const SaxReport& report, ReportDocument& doc,
                       const NormalRanges& ranges = {});

}  // namespace icmr::cmr
