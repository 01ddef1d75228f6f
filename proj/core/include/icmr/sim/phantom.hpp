#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icmr/cmr/perfusion.hpp"
#include "icmr/cmr/types.hpp"
#include "icmr/wire/messages.hpp"

namespace icmr::sim {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SessionKind { kSax, kLax, kPerfRest, kPerfStress };

SessionKind parse_session_kind(const std::string& text);
const char* session_kind_name(SessionKind kind);

// LV cavity semi-axes in mm; c runs along the long axis (patient z).
struct Axes {
  double a = 0.0, b = 0.0, c = 0.0;
};

struct PhantomParams {
  // SAX cine
  std::size_t n_slices = 11;
  std::size_t n_phases = 25;
  std::size_t matrix = 192;
  std::size_t n_coils = 4;
  double pixel_spacing_mm = 1.5625;
  double slice_thickness_mm = 8.0;
  double slice_spacing_mm = 10.0;
  Axes ed{27.0, 27.0, 45.0};
  Axes es{18.0, 18.0, 38.0};
  double myo_thickness_ed_mm = 8.0;
  double myo_thickness_es_mm = 11.0;
  double noise_sigma = 0.0;  // complex k-space noise, per sample

  double heart_rate_bpm = 68.0;
  double bsa_m2 = 1.9;
  std::string patient_key = "sim-0001";
  std::string sex;  // optional, forwarded in the session header

  // Pacing of SAX readouts: each slice is acquired over slice_ms, then
  // nothing is sent for gap_ms.
  double slice_ms = 7000.0;
  double gap_ms = 4000.0;
  double frame_ms = 0.0;  // LAX/perfusion image frames

  // LAX
  double mitral_half_width_mm = 12.0;
  double tapse_ratio = 1.2;  // tricuspid excursion relative to mitral

  // Perfusion
  std::size_t perf_matrix = 96;
  std::size_t aif_matrix = 48;
  double aif_pixel_spacing_mm = 3.0;
  std::size_t aif_frames = 60;
  double aif_t0_s = 6.0;  // bolus arrival in the RV
  double aif_alpha = 3.0;
  double aif_beta_s = 1.5;
  double aif_peak = 4.0;  // RV peak above baseline
  double rv_lv_delay_s = 4.0;
  double stress_reserve = 2.5;
  std::vector<int> ischemic_sectors{7, 8, 13};  // 1-based, reserve 1.2
  bool identical_stress = false;  // stress flows equal rest flows

  std::uint64_t seed = 1;
  std::string chain;  // CONFIG_NAME; empty picks the kind's default chain

  // Throws SimError naming the first invalid field.
  void validate() const;
};

struct GroundTruth {
  SessionKind kind = SessionKind::kSax;

  // sax
  double edv_ml = 0.0, esv_ml = 0.0, ef_percent = 0.0, mass_g = 0.0;
  std::size_t ed_phase = 0, es_phase = 0;
  std::size_t expected_frames = 0;  // reconstructed frames for sax

  // lax, keyed by view name
  std::map<std::string, double> gls_percent, mapse_mm;
  std::optional<double> tapse_mm;

  // perfusion
  cmr::SectorValues flow;
  std::optional<cmr::SectorValues> mpr;  // stress only
  std::optional<double> ptt_s;

  std::string to_json() const;
  static GroundTruth from_json(const std::string& text);
};

struct Session {
  SessionKind kind = SessionKind::kSax;
  std::vector<wire::Message> messages;
  std::vector<double> send_ms;  // scheduled offset of each message
  GroundTruth truth;
  // [phase][slice] label masks for sax, [frame] for lax/perfusion flow maps
  std::vector<std::vector<cmr::SegmentationMask>> masks;
};

// Deterministic for fixed (kind, params). Message order:
// CONFIG_NAME, SESSION_HEADER, data..., CLOSE.
Session generate_session(SessionKind kind, const PhantomParams& params);

// Label image of one SAX slice at a cardiac phase.
cmr::SegmentationMask sax_mask(const PhantomParams& params, std::size_t slice, std::size_t phase);

// Phantom intensity per label (background, LV blood, myocardium, RV blood).
inline constexpr std::array<float, 4> kLabelIntensity{0.1f, 1.0f, 0.35f, 0.8f};

// Fraction of the ED to ES contraction at a phase: 0 at phase 0, 1 at
// n_phases / 2, cosine shaped in between and back.
double contraction(std::size_t phase, std::size_t n_phases);

std::string default_chain(SessionKind kind);

}  // namespace icmr::sim
