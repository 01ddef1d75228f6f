#include "icmr/sim/phantom.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <json.hpp>

#include "icmr/cmr/sax.hpp"
#include "icmr/recon/recon.hpp"

namespace icmr::sim {

namespace {

constexpr double kPi = std::numbers::pi;

using cmr::label::kBackground;
using cmr::label::kLvBlood;
using cmr::label::kLvMyocardium;
using cmr::label::kRvBlood;

double ellipsoid_volume_ml(double a, double b, double c) { return 4.0 / 3.0 * kPi * a * b * c / 1000.0; }

Axes axes_at(const PhantomParams& p, std::size_t phase) {
  double f = contraction(phase, p.n_phases);
  return {p.ed.a + f * (p.es.a - p.ed.a), p.ed.b + f * (p.es.b - p.ed.b), p.ed.c + f * (p.es.c - p.ed.c)};
}

double thickness_at(const PhantomParams& p, std::size_t phase) {
  double f = contraction(phase, p.n_phases);
  return p.myo_thickness_ed_mm + f * (p.myo_thickness_es_mm - p.myo_thickness_ed_mm);
}

// The apex stays put at z = c_ED while the base moves towards it.
double centre_z(const PhantomParams& p, std::size_t phase) { return p.ed.c - axes_at(p, phase).c; }

double slice_z(const PhantomParams& p, std::size_t slice) {
  return (static_cast<double>(slice) - static_cast<double>(p.n_slices / 2)) * p.slice_spacing_mm;
}

double rr_ms(const PhantomParams& p) { return 60000.0 / p.heart_rate_bpm; }
double phase_time_ms(const PhantomParams& p, std::size_t phase) {
  return static_cast<double>(phase) * rr_ms(p) / static_cast<double>(p.n_phases);
}

bool inside(double x, double y, double z, double a, double b, double c) {
  return (x * x) / (a * a) + (y * y) / (b * b) + (z * z) / (c * c) <= 1.0;
}

std::uint16_t sax_label(const PhantomParams& p, std::size_t phase, double x, double y, double z) {
  const Axes ax = axes_at(p, phase);
  const double t = thickness_at(p, phase);
  const double dz = z - centre_z(p, phase);
  if (inside(x, y, dz, ax.a, ax.b, ax.c)) return kLvBlood;
  if (inside(x, y, dz, ax.a + t, ax.b + t, ax.c + t)) return kLvMyocardium;
  // RV: a flattened ellipsoid hugging the septum, shorter than the LV.
  const double rv_a = 0.6 * (ax.a + t), rv_b = 1.1 * (ax.b + t), rv_c = 0.75 * (ax.c + t);
  const double rv_x = -(ax.a + t + rv_a - 2.0);
  if (inside(x - rv_x, y, dz + 0.2 * ax.c, rv_a, rv_b, rv_c)) return kRvBlood;
  return kBackground;
}

wire::ImageHeader grid_header(std::size_t n, double spacing, const wire::Vec3f& centre,
                              const wire::Vec3f& row_dir, const wire::Vec3f& col_dir) {
  wire::ImageHeader h;
  h.rows = static_cast<std::uint16_t>(n);
  h.cols = static_cast<std::uint16_t>(n);
  h.pixel_spacing_mm = {static_cast<float>(spacing), static_cast<float>(spacing)};
  const double half = static_cast<double>(n / 2) * spacing;
  for (int i = 0; i < 3; ++i) {
    h.position_mm[i] = static_cast<float>(centre[i] - half * row_dir[i] - half * col_dir[i]);
  }
  h.row_dir = row_dir;
  h.col_dir = col_dir;
  return h;
}

// Offset of pixel index i from the grid centre, mm.
double offset(std::size_t i, std::size_t n, double spacing) {
  return (static_cast<double>(i) - static_cast<double>(n / 2)) * spacing;
}

wire::MetaAttributes session_header(const PhantomParams& p, SessionKind kind) {
  wire::MetaAttributes h;
  h.add("patient_key", p.patient_key);
  h.add("scan_kind", session_kind_name(kind));
  h.add("heart_rate_bpm", p.heart_rate_bpm);
  h.add("bsa_m2", p.bsa_m2);
  if (!p.sex.empty()) h.add("sex", p.sex);
  if (kind == SessionKind::kSax) {
    h.add("n_phases", static_cast<double>(p.n_phases));
    h.add("fov_read_mm", static_cast<double>(p.matrix) * p.pixel_spacing_mm);
    h.add("fov_phase_mm", static_cast<double>(p.matrix) * p.pixel_spacing_mm);
    h.add("slice_thickness_mm", p.slice_thickness_mm);
    h.add("slice_spacing_mm", p.slice_spacing_mm);
  }
  if (kind == SessionKind::kPerfRest || kind == SessionKind::kPerfStress) {
    h.add("respiratory_condition", "free_breathing");
  }
  return h;
}

// Smooth coil sensitivities, normalised so sum_c |s_c|^2 == 1 per pixel.
std::vector<std::vector<std::complex<float>>> coil_maps(const PhantomParams& p, std::mt19937_64& rng) {
  const std::size_t n = p.matrix;
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::uniform_real_distribution<double> phase0(-kPi, kPi);
  const double fov = static_cast<double>(n) * p.pixel_spacing_mm;
  struct Coil {
    double x, y, phi, gx, gy;
  };
  std::vector<Coil> coils;
  for (std::size_t c = 0; c < p.n_coils; ++c) {
    double ang = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(p.n_coils) + jitter(rng);
    coils.push_back({0.6 * fov * std::cos(ang), 0.6 * fov * std::sin(ang), phase0(rng),
                     jitter(rng) * 0.02, jitter(rng) * 0.02});
  }
  const double sigma = 0.5 * fov;
  std::vector<std::vector<std::complex<float>>> maps(p.n_coils, std::vector<std::complex<float>>(n * n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      const double x = offset(col, n, p.pixel_spacing_mm), y = offset(r, n, p.pixel_spacing_mm);
      std::vector<std::complex<double>> s(p.n_coils);
      double energy = 0.0;
      for (std::size_t c = 0; c < p.n_coils; ++c) {
        const auto& k = coils[c];
        double d2 = (x - k.x) * (x - k.x) + (y - k.y) * (y - k.y);
        double w = std::exp(-d2 / (2.0 * sigma * sigma));
        s[c] = std::polar(w, k.phi + k.gx * x + k.gy * y);
        energy += w * w;
      }
      const double norm = 1.0 / std::sqrt(energy);
      for (std::size_t c = 0; c < p.n_coils; ++c) {
        maps[c][r * n + col] = std::complex<float>(s[c] * norm);
      }
    }
  }
  return maps;
}

void generate_sax(const PhantomParams& p, Session& s, std::mt19937_64& rng) {
  const std::size_t n = p.matrix;
  const auto maps = coil_maps(p, rng);
  std::normal_distribution<float> noise(0.0f, static_cast<float>(p.noise_sigma));
  const std::size_t per_slice = p.n_phases * n;
  const double slot = p.slice_ms + p.gap_ms;
  std::uint32_t counter = 0;

  s.masks.assign(p.n_phases, std::vector<cmr::SegmentationMask>(p.n_slices));
  for (std::size_t ph = 0; ph < p.n_phases; ++ph) {
    for (std::size_t sl = 0; sl < p.n_slices; ++sl) s.masks[ph][sl] = sax_mask(p, sl, ph);
  }

  std::vector<std::complex<float>> coil_image(n * n);
  for (std::size_t sl = 0; sl < p.n_slices; ++sl) {
    for (std::size_t ph = 0; ph < p.n_phases; ++ph) {
      const auto& mask = s.masks[ph][sl];
      std::vector<std::vector<std::complex<float>>> kspace(p.n_coils);
      for (std::size_t c = 0; c < p.n_coils; ++c) {
        for (std::size_t i = 0; i < n * n; ++i) {
          coil_image[i] = maps[c][i] * kLabelIntensity[mask.labels[i]];
        }
        recon::centered_fft2(coil_image, n, n);
        kspace[c] = coil_image;
      }
      for (std::size_t k = 0; k < n; ++k) {
        wire::KSpaceReadout r;
        auto& h = r.header;
        h.scan_counter = counter++;
        h.num_samples = static_cast<std::uint16_t>(n);
        h.num_coils = static_cast<std::uint16_t>(p.n_coils);
        h.kline_idx = static_cast<std::uint16_t>(k);
        h.slice_idx = static_cast<std::uint16_t>(sl);
        h.phase_idx = static_cast<std::uint16_t>(ph);
        h.sample_time_ns = 2500;
        h.position_mm = {0.0f, 0.0f, static_cast<float>(slice_z(p, sl))};
        const bool last_in_slice = ph + 1 == p.n_phases && k + 1 == n;
        if (last_in_slice) h.flags |= wire::readout_flags::kLastInSlice;
        if (last_in_slice && sl + 1 == p.n_slices) h.flags |= wire::readout_flags::kLastInScan;
        r.samples.resize(p.n_coils * n);
        for (std::size_t c = 0; c < p.n_coils; ++c) {
          for (std::size_t i = 0; i < n; ++i) {
            auto v = kspace[c][k * n + i];
            if (p.noise_sigma > 0.0) v += std::complex<float>(noise(rng), noise(rng));
            r.samples[c * n + i] = v;
          }
        }
        const std::size_t j = ph * n + k;
        s.send_ms.push_back(static_cast<double>(sl) * slot +
                            p.slice_ms * static_cast<double>(j) / static_cast<double>(per_slice));
        s.messages.emplace_back(std::move(r));
      }
    }
  }

  auto& t = s.truth;
  t.ed_phase = 0;
  t.es_phase = p.n_phases / 2;
  t.edv_ml = ellipsoid_volume_ml(p.ed.a, p.ed.b, p.ed.c);
  t.esv_ml = ellipsoid_volume_ml(p.es.a, p.es.b, p.es.c);
  t.ef_percent = 100.0 * (t.edv_ml - t.esv_ml) / t.edv_ml;
  const double th = p.myo_thickness_ed_mm;
  t.mass_g = (ellipsoid_volume_ml(p.ed.a + th, p.ed.b + th, p.ed.c + th) - t.edv_ml) *
             cmr::kMyocardialDensity;
  t.expected_frames = p.n_slices * p.n_phases;
}

// Long-axis plane through the LV axis: CH4 spans x-z, CH2 spans y-z.
struct LaxPlane {
  cmr::View view;
  wire::Vec3f col_dir;
  std::uint16_t series;
};

void generate_lax(const PhantomParams& p, Session& s) {
  const std::size_t n = p.matrix;
  const double sp = p.pixel_spacing_mm;
  const LaxPlane planes[] = {{cmr::View::kCh4, {1.0f, 0.0f, 0.0f}, 0}, {cmr::View::kCh2, {0.0f, 1.0f, 0.0f}, 1}};
  const double base_ed = p.ed.c - 2.0 * p.ed.c;
  double t_ms = 0.0;
  for (const auto& plane : planes) {
    for (std::size_t ph = 0; ph < p.n_phases; ++ph) {
      auto h = grid_header(n, sp, {0.0f, 0.0f, 0.0f}, {0.0f, 0.0f, 1.0f}, plane.col_dir);
      h.series_idx = plane.series;
      h.phase_idx = static_cast<std::uint16_t>(ph);
      h.slice_thickness_mm = static_cast<float>(p.slice_thickness_mm);
      h.slice_spacing_mm = static_cast<float>(p.slice_thickness_mm);
      h.trigger_time_ms = static_cast<float>(phase_time_ms(p, ph));

      cmr::SegmentationMask mask{h, std::vector<std::uint16_t>(n * n, kBackground)};
      mask.header.data_type = wire::PixelType::kLabel;
      wire::ImageFrame f;
      f.header = h;
      std::vector<float> px(n * n);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          const double z = offset(r, n, sp), u = offset(c, n, sp);
          // in-plane coordinate u is x (CH4) or y (CH2); the other is 0
          std::uint16_t l = plane.view == cmr::View::kCh4 ? sax_label(p, ph, u, 0.0, z)
                                                          : sax_label(p, ph, 0.0, u, z);
          mask.labels[r * n + c] = l;
          px[r * n + c] = kLabelIntensity[l];
        }
      }
      f.pixels = std::move(px);

      const double base = p.ed.c - 2.0 * axes_at(p, ph).c;
      auto to_pixel = [&](double u, double z) {
        return cmr::Point2{z / sp + static_cast<double>(n / 2), u / sp + static_cast<double>(n / 2)};
      };
      f.meta.add("view", cmr::view_name(plane.view));
      f.meta.add("gt_landmark", cmr::format_landmark_entry("apex", to_pixel(0.0, p.ed.c)));
      f.meta.add("gt_landmark", cmr::format_landmark_entry("mv1", to_pixel(-p.mitral_half_width_mm, base)));
      f.meta.add("gt_landmark", cmr::format_landmark_entry("mv2", to_pixel(p.mitral_half_width_mm, base)));
      if (plane.view == cmr::View::kCh4) {
        const double tv_u = -(p.ed.a + p.myo_thickness_ed_mm + 0.9 * (p.ed.a + p.myo_thickness_ed_mm));
        const double tv_z = base_ed + p.tapse_ratio * (base - base_ed);
        f.meta.add("gt_landmark", cmr::format_landmark_entry("tv_lat", to_pixel(tv_u, tv_z)));
      }
      s.masks.push_back({mask});
      s.send_ms.push_back(t_ms);
      t_ms += p.frame_ms;
      s.messages.emplace_back(std::move(f));
    }
  }

  const double l_ed = 2.0 * p.ed.c, l_es = 2.0 * p.es.c;
  const double excursion = l_ed - l_es;
  for (const char* v : {"CH4", "CH2"}) {
    s.truth.gls_percent[v] = 100.0 * (l_ed - l_es) / l_ed;
    s.truth.mapse_mm[v] = excursion;
  }
  s.truth.tapse_mm = p.tapse_ratio * excursion;
  s.truth.ed_phase = 0;
  s.truth.es_phase = p.n_phases / 2;
}

cmr::SectorValues rest_flows(const PhantomParams& p) {
  std::mt19937_64 rng(p.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> d(-0.2, 0.2);
  cmr::SectorValues out;
  for (auto& v : out) v = std::round((1.0 + d(rng)) * 1000.0) / 1000.0;
  return out;
}

double reserve(const PhantomParams& p, std::size_t sector) {
  if (p.identical_stress) return 1.0;
  for (int s : p.ischemic_sectors) {
    if (static_cast<std::size_t>(s) == sector + 1) return 1.2;
  }
  return p.stress_reserve;
}

double gamma_variate(double t_s, const PhantomParams& p) {
  if (t_s <= 0.0) return 0.0;
  const double x = t_s / (p.aif_alpha * p.aif_beta_s);
  return std::pow(x, p.aif_alpha) * std::exp(p.aif_alpha * (1.0 - x));
}

void generate_perf(const PhantomParams& p, SessionKind kind, Session& s) {
  const bool stress = kind == SessionKind::kPerfStress;
  const auto rest = rest_flows(p);
  cmr::SectorValues flows;
  for (std::size_t k = 0; k < cmr::kSectors; ++k) flows[k] = *rest[k] * (stress ? reserve(p, k) : 1.0);

  const std::size_t n = p.perf_matrix;
  const double sp = p.pixel_spacing_mm;
  const cmr::SliceClass classes[] = {cmr::SliceClass::kBasal, cmr::SliceClass::kMid, cmr::SliceClass::kApical};
  const double scales[] = {1.0, 0.9, 0.75};
  double t_ms = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double k = scales[i];
    const double ri = 20.0 * k, ro = 30.0 * k, d = 38.0 * k, rv = 16.0 * k;
    // RV centred at display angle 180 deg; the contact arc ends at 180 + alpha
    const double alpha = std::acos((ro * ro + d * d - rv * rv) / (2.0 * ro * d)) * 180.0 / kPi;
    const double insertion = 180.0 + alpha;
    const int count = classes[i] == cmr::SliceClass::kApical ? 4 : 6;
    const int base = classes[i] == cmr::SliceClass::kBasal ? 0 : classes[i] == cmr::SliceClass::kMid ? 6 : 12;

    auto h = grid_header(n, sp, {0.0f, 0.0f, static_cast<float>(-20.0 + 20.0 * static_cast<double>(i))},
                         {0.0f, 1.0f, 0.0f}, {1.0f, 0.0f, 0.0f});
    h.series_idx = static_cast<std::uint16_t>(i);
    h.slice_idx = static_cast<std::uint16_t>(i);
    h.slice_thickness_mm = static_cast<float>(p.slice_thickness_mm);
    h.slice_spacing_mm = static_cast<float>(p.slice_spacing_mm);
    cmr::SegmentationMask mask{h, std::vector<std::uint16_t>(n * n, kBackground)};
    mask.header.data_type = wire::PixelType::kLabel;
    std::vector<float> px(n * n, 0.0f);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const double x = offset(c, n, sp), y = offset(r, n, sp);
        const double rad = std::hypot(x, y);
        std::uint16_t l = kBackground;
        if (rad <= ri) {
          l = kLvBlood;
        } else if (rad <= ro) {
          l = kLvMyocardium;
        } else if (std::hypot(x + d, y) <= rv) {
          l = kRvBlood;
        }
        mask.labels[r * n + c] = l;
        if (l == kLvMyocardium) {
          double angle = std::atan2(-y / sp, x / sp) * 180.0 / kPi;
          double rel = std::fmod(angle - insertion + 720.0, 360.0);
          int idx = std::min(count - 1, static_cast<int>(rel / (360.0 / count)));
          px[r * n + c] = static_cast<float>(*flows[static_cast<std::size_t>(base + idx)]);
        }
      }
    }
    wire::ImageFrame f;
    f.header = h;
    f.pixels = std::move(px);
    f.meta.add("perf_role", "flow");
    f.meta.add("slice_class", cmr::slice_class_name(classes[i]));
    f.meta.add("gt_mask", cmr::encode_labels_rle(mask.labels));
    s.masks.push_back({mask});
    s.send_ms.push_back(t_ms);
    t_ms += p.frame_ms;
    s.messages.emplace_back(std::move(f));
  }

  // AIF: low resolution series, RV and LV blood pools with a delayed bolus.
  const std::size_t m = p.aif_matrix;
  const double asp = p.aif_pixel_spacing_mm;
  auto h = grid_header(m, asp, {0.0f, 0.0f, 0.0f}, {0.0f, 1.0f, 0.0f}, {1.0f, 0.0f, 0.0f});
  h.series_idx = 3;
  h.slice_thickness_mm = static_cast<float>(p.slice_thickness_mm);
  h.slice_spacing_mm = static_cast<float>(p.slice_spacing_mm);
  std::vector<std::uint16_t> labels(m * m, kBackground);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      const double x = offset(c, m, asp), y = offset(r, m, asp);
      const double rad = std::hypot(x, y);
      if (rad <= 18.0) {
        labels[r * m + c] = kLvBlood;
      } else if (rad <= 26.0) {
        labels[r * m + c] = kLvMyocardium;
      } else if (std::hypot(x + 42.0, y) <= 14.0) {
        labels[r * m + c] = kRvBlood;
      }
    }
  }
  const std::string rle = cmr::encode_labels_rle(labels);
  const double scale = stress ? 1.0 : 0.9;
  for (std::size_t k = 0; k < p.aif_frames; ++k) {
    const double t = static_cast<double>(k) * rr_ms(p);
    const double rv_sig = 0.3 + scale * p.aif_peak * gamma_variate(t / 1000.0 - p.aif_t0_s, p);
    const double lv_sig =
        0.3 + scale * 0.8 * p.aif_peak * gamma_variate(t / 1000.0 - p.aif_t0_s - p.rv_lv_delay_s, p);
    const float values[] = {0.05f, static_cast<float>(lv_sig), 0.2f, static_cast<float>(rv_sig)};
    wire::ImageFrame f;
    f.header = h;
    f.header.phase_idx = static_cast<std::uint16_t>(k);
    f.header.trigger_time_ms = static_cast<float>(t);
    std::vector<float> px(m * m);
    for (std::size_t i = 0; i < m * m; ++i) px[i] = values[labels[i]];
    f.pixels = std::move(px);
    f.meta.add("perf_role", "aif");
    f.meta.add("gt_mask", rle);
    s.send_ms.push_back(t_ms);
    t_ms += p.frame_ms;
    s.messages.emplace_back(std::move(f));
  }

  s.truth.flow = flows;
  if (stress) {
    cmr::SectorValues mpr;
    for (std::size_t k = 0; k < cmr::kSectors; ++k) mpr[k] = *flows[k] / *rest[k];
    s.truth.mpr = mpr;
  }
  s.truth.ptt_s = p.rv_lv_delay_s;
}

nlohmann::json sectors_json(const cmr::SectorValues& v) {
  auto out = nlohmann::json::array();
  for (const auto& x : v) out.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
  return out;
}

cmr::SectorValues sectors_from_json(const nlohmann::json& j) {
  cmr::SectorValues out;
  if (j.size() != cmr::kSectors) throw SimError("ground truth: expected 16 sector values");
  for (std::size_t k = 0; k < cmr::kSectors; ++k) {
    if (!j[k].is_null()) out[k] = j[k].get<double>();
  }
  return out;
}

}  // namespace

SessionKind parse_session_kind(const std::string& text) {
  if (text == "sax") return SessionKind::kSax;
  if (text == "lax") return SessionKind::kLax;
  if (text == "perf_rest") return SessionKind::kPerfRest;
  if (text == "perf_stress") return SessionKind::kPerfStress;
  throw SimError("unknown session kind '" + text + "' (sax, lax, perf_rest, perf_stress)");
}

const char* session_kind_name(SessionKind kind) {
  switch (kind) {
    case SessionKind::kSax: return "sax";
    case SessionKind::kLax: return "lax";
    case SessionKind::kPerfRest: return "perf_rest";
    case SessionKind::kPerfStress: return "perf_stress";
  }
  return "?";
}

std::string default_chain(SessionKind kind) {
  switch (kind) {
    case SessionKind::kSax: return "sax_inline_ai";
    case SessionKind::kLax: return "lax_inline_ai";
    case SessionKind::kPerfRest:
    case SessionKind::kPerfStress: return "perf_inline_ai";
  }
  return "";
}

double contraction(std::size_t phase, std::size_t n_phases) {
  const double m = static_cast<double>(n_phases / 2);
  const double ph = static_cast<double>(phase % n_phases);
  if (m == 0.0) return 0.0;
  if (ph <= m) return 0.5 * (1.0 - std::cos(kPi * ph / m));
  const double rest = static_cast<double>(n_phases) - m;
  return 0.5 * (1.0 + std::cos(kPi * (ph - m) / rest));
}

void PhantomParams::validate() const {
  auto fail = [](const std::string& what) { throw SimError("invalid phantom parameter: " + what); };
  if (n_slices == 0 || n_slices > 1000) fail("n_slices");
  if (n_phases < 2 || n_phases > 1000) fail("n_phases");
  if (matrix < 8 || matrix > 1024 || matrix % 2) fail("matrix (even, 8..1024)");
  if (perf_matrix < 32 || perf_matrix > 1024) fail("perf_matrix");
  if (aif_matrix < 16 || aif_matrix > 1024) fail("aif_matrix");
  if (n_coils == 0 || n_coils > 64) fail("n_coils");
  if (!(pixel_spacing_mm > 0.0) || !(aif_pixel_spacing_mm > 0.0)) fail("pixel spacing");
  if (!(slice_thickness_mm > 0.0) || slice_spacing_mm < slice_thickness_mm) fail("slice thickness/spacing");
  for (const auto* ax : {&ed, &es}) {
    if (!(ax->a > 0.0 && ax->b > 0.0 && ax->c > 0.0)) fail("ellipsoid axes must be positive");
  }
  if (es.a > ed.a || es.b > ed.b || es.c > ed.c) fail("ES axes must not exceed ED axes");
  if (!(myo_thickness_ed_mm > 0.0) || !(myo_thickness_es_mm > 0.0)) fail("myocardial thickness");
  if (!(slice_ms > 0.0) || gap_ms < 0.0 || frame_ms < 0.0) fail("pacing");
  if (!(heart_rate_bpm > 0.0) || !(bsa_m2 > 0.0)) fail("heart rate / BSA");
  if (aif_frames < 8) fail("aif_frames (>= 8)");
  if (noise_sigma < 0.0) fail("noise_sigma");
  for (int s : ischemic_sectors) {
    if (s < 1 || s > 16) fail("ischemic sector ids are 1..16");
  }
  if (patient_key.empty() || patient_key.find('\n') != std::string::npos) fail("patient_key");
}

cmr::SegmentationMask sax_mask(const PhantomParams& p, std::size_t slice, std::size_t phase) {
  const std::size_t n = p.matrix;
  auto h = grid_header(n, p.pixel_spacing_mm, {0.0f, 0.0f, static_cast<float>(slice_z(p, slice))},
                       {0.0f, 1.0f, 0.0f}, {1.0f, 0.0f, 0.0f});
  h.data_type = wire::PixelType::kLabel;
  h.slice_idx = static_cast<std::uint16_t>(slice);
  h.phase_idx = static_cast<std::uint16_t>(phase);
  h.slice_thickness_mm = static_cast<float>(p.slice_thickness_mm);
  h.slice_spacing_mm = static_cast<float>(p.slice_spacing_mm);
  h.trigger_time_ms = static_cast<float>(phase_time_ms(p, phase));
  cmr::SegmentationMask m{h, std::vector<std::uint16_t>(n * n)};
  const double z = slice_z(p, slice);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      m.labels[r * n + c] = sax_label(p, phase, offset(c, n, p.pixel_spacing_mm), offset(r, n, p.pixel_spacing_mm), z);
    }
  }
  return m;
}

Session generate_session(SessionKind kind, const PhantomParams& params) {
  params.validate();
  Session s;
  s.kind = kind;
  s.truth.kind = kind;
  std::mt19937_64 rng(params.seed);

  s.messages.emplace_back(wire::ConfigName{params.chain.empty() ? default_chain(kind) : params.chain});
  s.messages.emplace_back(wire::SessionHeader{session_header(params, kind)});
  s.send_ms = {0.0, 0.0};
  switch (kind) {
    case SessionKind::kSax: generate_sax(params, s, rng); break;
    case SessionKind::kLax: generate_lax(params, s); break;
    case SessionKind::kPerfRest:
    case SessionKind::kPerfStress: generate_perf(params, kind, s); break;
  }
  s.messages.emplace_back(wire::Close{});
  s.send_ms.push_back(s.send_ms.back());
  return s;
}

std::string GroundTruth::to_json() const {
  nlohmann::json j;
  j["kind"] = session_kind_name(kind);
  switch (kind) {
    case SessionKind::kSax:
      j["edv_ml"] = edv_ml;
      j["esv_ml"] = esv_ml;
      j["ef_percent"] = ef_percent;
      j["mass_g"] = mass_g;
      j["ed_phase"] = ed_phase;
      j["es_phase"] = es_phase;
      j["expected_frames"] = expected_frames;
      break;
    case SessionKind::kLax:
      j["gls_percent"] = gls_percent;
      j["mapse_mm"] = mapse_mm;
      j["tapse_mm"] = tapse_mm ? nlohmann::json(*tapse_mm) : nlohmann::json(nullptr);
      j["ed_phase"] = ed_phase;
      j["es_phase"] = es_phase;
      break;
    case SessionKind::kPerfRest:
    case SessionKind::kPerfStress:
      j["flow"] = sectors_json(flow);
      j["mpr"] = mpr ? sectors_json(*mpr) : nlohmann::json(nullptr);
      j["ptt_s"] = ptt_s ? nlohmann::json(*ptt_s) : nlohmann::json(nullptr);
      break;
  }
  return j.dump(2);
}

GroundTruth GroundTruth::from_json(const std::string& text) {
  GroundTruth t;
  try {
    auto j = nlohmann::json::parse(text);
    t.kind = parse_session_kind(j.at("kind").get<std::string>());
    switch (t.kind) {
      case SessionKind::kSax:
        t.edv_ml = j.at("edv_ml").get<double>();
        t.esv_ml = j.at("esv_ml").get<double>();
        t.ef_percent = j.at("ef_percent").get<double>();
        t.mass_g = j.at("mass_g").get<double>();
        t.ed_phase = j.at("ed_phase").get<std::size_t>();
        t.es_phase = j.at("es_phase").get<std::size_t>();
        t.expected_frames = j.at("expected_frames").get<std::size_t>();
        break;
      case SessionKind::kLax:
        t.gls_percent = j.at("gls_percent").get<std::map<std::string, double>>();
        t.mapse_mm = j.at("mapse_mm").get<std::map<std::string, double>>();
        if (!j.at("tapse_mm").is_null()) t.tapse_mm = j["tapse_mm"].get<double>();
        t.ed_phase = j.at("ed_phase").get<std::size_t>();
        t.es_phase = j.at("es_phase").get<std::size_t>();
        break;
      case SessionKind::kPerfRest:
      case SessionKind::kPerfStress:
        t.flow = sectors_from_json(j.at("flow"));
        if (!j.at("mpr").is_null()) t.mpr = sectors_from_json(j["mpr"]);
        if (!j.at("ptt_s").is_null()) t.ptt_s = j["ptt_s"].get<double>();
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw SimError(std::string("ground truth: ") + e.what());
  }
  return t;
}

}  // namespace icmr::sim
