#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icmr/cmr/report.hpp"
#include "icmr/cmr/types.hpp"

namespace icmr::cmr {

class PerfusionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kSectors = 16;
using SectorValues = std::array<std::optional<double>, kSectors>;

enum class SliceClass { kBasal, kMid, kApical };
SliceClass parse_slice_class(const std::string& text);
const char* slice_class_name(SliceClass c);

enum class Rotation { kCcw, kCw };
Rotation parse_rotation(const std::string& text);

// Angle of pixel (row, col) about (r0, c0), degrees in [0, 360), counter-
// clockwise in the displayed image: atan2(-(row - r0), col - c0).
double pixel_angle_deg(double row, double col, double r0, double c0);

// LV blood centroid (row, col).
Point2 blood_centroid(const SegmentationMask& mask);

struct RvInsertion {
  Point2 point;
  double angle_deg = 0.0;
};

// Candidates are myocardium pixels 8-adjacent to RV blood; their angles form
// an arc whose counterclockwise end is returned.
RvInsertion find_rv_insertion(const SegmentationMask& mask);

struct SectorMap {
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint16_t> sector;  // 0 none, 1..16
};

// 6 sectors for basal/mid, 4 for apical; sector 1 of the slice starts at
// the insertion angle and advances in the given rotation.
SectorMap split_sectors(const SegmentationMask& mask, double insertion_angle_deg,
                        SliceClass slice_class, Rotation rotation = Rotation::kCcw);

inline constexpr std::uint16_t kLayerEndo = 1;
inline constexpr std::uint16_t kLayerEpi = 2;

// Per myocardium pixel: endo when the distance to the blood-adjacent
// boundary is smaller than the distance to the outer boundary, else epi.
std::vector<std::uint16_t> split_endo_epi(const SegmentationMask& mask);

struct SectorStats {
  SectorValues mean, endo, epi;
  std::array<std::size_t, kSectors> pixels{};
};

SectorStats sector_stats(const std::vector<float>& flow, const SectorMap& sectors,
                         const std::vector<std::uint16_t>& layers);

inline constexpr double kMprRestFloor = 0.05;  // mL/min/g
SectorValues perfusion_reserve(const SectorValues& stress, const SectorValues& rest);

// Baseline (mean of first 3 samples) subtracted, clamped at 0.
std::vector<double> baseline_corrected(const std::vector<double>& signal);

struct FirstPassWindow {
  std::size_t begin = 0, end = 0;  // [begin, end)
};
FirstPassWindow first_pass_window(const std::vector<double>& corrected);

enum class PttMethod { kCentroid, kPeak };
PttMethod parse_ptt_method(const std::string& text);

struct AifResult {
  std::vector<double> rv_signal, lv_signal;  // baseline corrected
  double ptt_s = 0.0;
};

// Curves are raw mean signals; times in ms for each curve separately.
AifResult ptt_from_curves(const std::vector<double>& t_rv_ms, const std::vector<double>& rv,
                          const std::vector<double>& t_lv_ms, const std::vector<double>& lv,
                          PttMethod method = PttMethod::kCentroid);

// Mean signal over mask pixels with `code`, per frame.
std::vector<double> mask_mean_curve(const std::vector<std::vector<float>>& frames,
                                    const SegmentationMask& mask, std::uint16_t code);

struct AifInputs {
  std::vector<std::vector<float>> frames;  // time ordered
  std::vector<double> times_ms;
  SegmentationMask rv_mask;  // pixels with label RV blood
  SegmentationMask lv_mask;  // pixels with label LV blood
};
AifResult aif_and_ptt(const AifInputs& in, PttMethod method = PttMethod::kCentroid);

// Tables "perf_sectors" (and "perf_mpr" when `rest` is given), curves
// "perf_aif".
void add_perf_to_report(const SectorStats& stats, const std::optional<SectorValues>& rest,
                        const std::optional<AifResult>& aif, const std::vector<double>& aif_times_ms,
                        ReportDocument& doc);

}  // namespace icmr::cmr
