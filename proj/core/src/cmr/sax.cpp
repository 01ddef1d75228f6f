#include "icmr/cmr/sax.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace icmr::cmr {

double label_volume_ml(const SegmentationMask& mask, std::uint16_t code) {
  const auto& h = mask.header;
  return static_cast<double>(mask.count(code)) * h.pixel_spacing_mm[0] * h.pixel_spacing_mm[1] *
         h.slice_spacing_mm / 1000.0;
}

namespace {

VolumeBreakdown label_volume(const std::vector<SegmentationMask>& stack,
                             const std::vector<bool>& included, std::uint16_t code) {
  if (!included.empty() && included.size() != stack.size()) {
    throw SaxError("inclusion flags do not match the slice stack");
  }
  VolumeBreakdown out;
  out.per_slice_ml.assign(stack.size(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (!included.empty() && !included[i]) continue;
    any = true;
    out.per_slice_ml[i] = label_volume_ml(stack[i], code);
  }
  if (!any && !stack.empty()) spdlog::warn("volume requested with no included slices");
  for (double v : out.per_slice_ml) out.total_ml += v;
  return out;
}

}  // namespace

VolumeBreakdown blood_volume(const std::vector<SegmentationMask>& stack,
                             const std::vector<bool>& included) {
  return label_volume(stack, included, label::kLvBlood);
}

VolumeBreakdown myocardium_volume(const std::vector<SegmentationMask>& stack,
                                  const std::vector<bool>& included) {
  return label_volume(stack, included, label::kLvMyocardium);
}

std::pair<std::size_t, std::size_t> find_ed_es(const std::vector<double>& volumes) {
  if (volumes.size() < 2) throw SaxError("ED/ES detection needs at least 2 phases");
  auto ed = std::max_element(volumes.begin(), volumes.end()) - volumes.begin();
  auto es = std::min_element(volumes.begin(), volumes.end()) - volumes.begin();
  return {static_cast<std::size_t>(ed), static_cast<std::size_t>(es)};
}

ValvePlane fit_valve_plane(const std::vector<Vec3>& points, const Vec3& apex) {
  if (points.size() < 3) throw SaxError("valve plane needs at least 3 mitral points");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += Eigen::Vector3d(p[0], p[1], p[2]);
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  // Eigenvalues ascending; the middle one measures spread across the line.
  double spread = std::sqrt(std::max(0.0, eig.eigenvalues()[1]) / static_cast<double>(points.size()));
  if (spread <= 1e-6) throw SaxError("mitral points are collinear or coincident");
  Eigen::Vector3d n = eig.eigenvectors().col(0).normalized();

  ValvePlane plane{{mean[0], mean[1], mean[2]}, {n[0], n[1], n[2]}};
  double d = plane.signed_distance(apex);
  if (std::abs(d) < 1e-9) throw SaxError("apex lies on the valve plane");
  if (d < 0) plane.normal = -1.0 * plane.normal;
  return plane;
}

bool slice_included(const ValvePlane& plane, const wire::ImageHeader& h) {
  return plane.signed_distance(slice_center(h)) > 0.0;
}

double max_wall_thickness(const SegmentationMask& mask) {
  const long rows = mask.header.rows;
  const long cols = mask.header.cols;
  double r0 = 0, c0 = 0;
  std::size_t blood = 0, myo = 0;
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      auto l = mask.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      if (l == label::kLvBlood) {
        r0 += static_cast<double>(r);
        c0 += static_cast<double>(c);
        ++blood;
      } else if (l == label::kLvMyocardium) {
        ++myo;
      }
    }
  }
  if (myo == 0) throw SaxError("no myocardium in mask");
  if (blood == 0) throw SaxError("no LV blood in mask");
  r0 /= static_cast<double>(blood);
  c0 /= static_cast<double>(blood);

  const double sr = mask.header.pixel_spacing_mm[0];
  const double sc = mask.header.pixel_spacing_mm[1];
  // Boundaries are the 0.5 level of the bilinearly interpolated indicators
  // (blood, and blood or myocardium), so oblique rays see the boundary
  // between pixel centres rather than the staircase of pixel corners.
  auto sample = [&](double r, double c, bool with_myo) {
    const long r_lo = static_cast<long>(std::floor(r)), c_lo = static_cast<long>(std::floor(c));
    const double fr = r - static_cast<double>(r_lo), fc = c - static_cast<double>(c_lo);
    auto inside = [&](long rr, long cc) {
      if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) return 0.0;
      auto l = mask.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
      return (l == label::kLvBlood || (with_myo && l == label::kLvMyocardium)) ? 1.0 : 0.0;
    };
    return (1 - fr) * ((1 - fc) * inside(r_lo, c_lo) + fc * inside(r_lo, c_lo + 1)) +
           fr * ((1 - fc) * inside(r_lo + 1, c_lo) + fc * inside(r_lo + 1, c_lo + 1));
  };
  constexpr double kStep = 0.25;
  const double t_max = std::hypot(static_cast<double>(rows), static_cast<double>(cols));
  std::array<std::optional<double>, 360> profile;
  for (int deg = 0; deg < 360; ++deg) {
    double theta = deg * std::numbers::pi / 180.0;
    double dr = -std::sin(theta);
    double dc = std::cos(theta);
    double mm_per_px = std::hypot(dr * sr, dc * sc);
    // First downward crossing of the 0.5 level, linearly interpolated
    // between samples.
    auto crossing = [&](double from, bool with_myo) -> std::optional<double> {
      double prev = sample(r0 + from * dr, c0 + from * dc, with_myo);
      if (prev < 0.5) return std::nullopt;
      for (double t = from + kStep; t <= t_max; t += kStep) {
        double cur = sample(r0 + t * dr, c0 + t * dc, with_myo);
        if (cur < 0.5) return t - kStep + kStep * (prev - 0.5) / (prev - cur);
        prev = cur;
      }
      return std::nullopt;
    };
    auto t_in = crossing(0.0, false);
    if (!t_in) continue;
    auto t_out = crossing(std::floor(*t_in / kStep) * kStep, true);
    if (t_out && *t_out > *t_in) profile[static_cast<std::size_t>(deg)] = (*t_out - *t_in) * mm_per_px;
  }
  // Pixelated boundaries leave about half a pixel of noise per ray; average
  // over neighbouring rays before taking the maximum.
  constexpr int kHalfWindow = 5;
  double best = 0.0;
  bool found = false;
  for (int deg = 0; deg < 360; ++deg) {
    double sum = 0.0;
    int n = 0;
    for (int k = -kHalfWindow; k <= kHalfWindow; ++k) {
      const auto& v = profile[static_cast<std::size_t>((deg + k + 360) % 360)];
      if (v) {
        sum += *v;
        ++n;
      }
    }
    if (n > 0 && profile[static_cast<std::size_t>(deg)]) {
      best = std::max(best, sum / n);
      found = true;
    }
  }
  if (!found) throw SaxError("no ray crosses blood, myocardium and outside");
  return best;
}

SaxFunction sax_function(double edv_ml, double esv_ml, double mass_g,
                         std::optional<double> heart_rate_bpm) {
  if (edv_ml <= 0.0) throw SaxError("EDV is zero");
  SaxFunction f{};
  f.sv_ml = edv_ml - esv_ml;
  f.ef_percent = 100.0 * f.sv_ml / edv_ml;
  f.mcf_percent = mass_g > 0.0 ? 100.0 * f.sv_ml / (mass_g / kMyocardialDensity) : 0.0;
  if (heart_rate_bpm) f.co_l_min = f.sv_ml * *heart_rate_bpm / 1000.0;
  return f;
}

namespace {

std::optional<std::vector<bool>> inclusion_at(const SaxInputs& in, std::size_t phase,
                                              std::vector<std::string>& flags) {
  if (!in.lax) return std::nullopt;
  const auto& stack = in.stacks[phase];
  double t = stack.front().header.trigger_time_ms;
  std::vector<Vec3> mitral;
  std::vector<Vec3> apices;
  for (View v : {View::kCh2, View::kCh4}) {
    const auto* e = in.lax->nearest(v, t);
    if (!e) continue;
    for (const char* name : {"mv1", "mv2"}) {
      if (auto it = e->points.find(name); it != e->points.end()) mitral.push_back(it->second);
    }
    if (auto it = e->points.find("apex"); it != e->points.end()) apices.push_back(it->second);
  }
  if (apices.empty()) {
    flags.push_back("valve plane unavailable: no apex");
    return std::nullopt;
  }
  Vec3 apex{};
  for (const auto& a : apices) apex = apex + (1.0 / static_cast<double>(apices.size())) * a;
  try {
    auto plane = fit_valve_plane(mitral, apex);
    std::vector<bool> flags_out;
    for (const auto& m : stack) flags_out.push_back(slice_included(plane, m.header));
    return flags_out;
  } catch (const SaxError& e) {
    flags.push_back(std::string("valve plane unavailable: ") + e.what());
    return std::nullopt;
  }
}

}  // namespace

SaxReport sax_biomarkers(const SaxInputs& in) {
  if (in.stacks.size() < 2) throw SaxError("SAX analysis needs at least 2 phases");
  const std::size_t slices = in.stacks.front().size();
  if (slices == 0) throw SaxError("SAX analysis needs at least one slice");
  for (const auto& s : in.stacks) {
    if (s.size() != slices) throw SaxError("phases have different slice counts");
  }

  SaxReport out;
  for (const auto& m : in.stacks.front()) out.slice_idx.push_back(m.header.slice_idx);
  for (const auto& s : in.stacks) out.uncorrected_volumes_ml.push_back(blood_volume(s).total_ml);
  std::tie(out.ed_phase, out.es_phase) = find_ed_es(out.uncorrected_volumes_ml);

  auto ed_flags = inclusion_at(in, out.ed_phase, out.flags);
  auto es_flags = inclusion_at(in, out.es_phase, out.flags);
  if (ed_flags && es_flags) {
    out.included_ed = *ed_flags;
    out.included_es = *es_flags;
  } else {
    out.uncorrected_extent = true;
    out.flags.push_back("uncorrected extent");
    out.included_ed.assign(slices, true);
    out.included_es.assign(slices, true);
  }

  const auto& ed_stack = in.stacks[out.ed_phase];
  out.ed_blood = blood_volume(ed_stack, out.included_ed);
  out.es_blood = blood_volume(in.stacks[out.es_phase], out.included_es);
  out.ed_myo = myocardium_volume(ed_stack, out.included_ed);
  out.edv_ml = out.ed_blood.total_ml;
  out.esv_ml = out.es_blood.total_ml;
  if (out.edv_ml <= 0.0) throw SaxError("EDV is zero");
  out.mass_g = 0.0;
  for (double v : out.ed_myo.per_slice_ml) out.mass_g += v * kMyocardialDensity;

  auto f = sax_function(out.edv_ml, out.esv_ml, out.mass_g, in.heart_rate_bpm);
  out.sv_ml = f.sv_ml;
  out.ef_percent = f.ef_percent;
  out.mcf_percent = f.mcf_percent;
  out.co_l_min = f.co_l_min;
  if (!in.heart_rate_bpm) out.flags.push_back("no heart rate: CO omitted");
  if (in.bsa_m2 && *in.bsa_m2 > 0.0) {
    double bsa = *in.bsa_m2;
    out.edvi = out.edv_ml / bsa;
    out.esvi = out.esv_ml / bsa;
    out.svi = out.sv_ml / bsa;
    out.massi = out.mass_g / bsa;
    if (out.co_l_min) out.ci = *out.co_l_min / bsa;
  } else {
    out.flags.push_back("no BSA: indexed values omitted");
  }

  for (const auto& m : ed_stack) {
    if (m.count(label::kLvBlood) == 0 || m.count(label::kLvMyocardium) == 0) {
      out.wall_thickness_mm.push_back(std::nullopt);
      continue;
    }
    try {
      out.wall_thickness_mm.push_back(max_wall_thickness(m));
    } catch (const SaxError&) {
      out.wall_thickness_mm.push_back(std::nullopt);
    }
  }
  return out;
}

void add_sax_to_report(const SaxReport& r, ReportDocument& doc, const NormalRanges& ranges) {
  auto range = [&](const std::string& key) -> Cell {
    auto it = ranges.find(key);
    if (it == ranges.end()) return std::monostate{};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f-%.1f", it->second.first, it->second.second);
    return std::string(buf);
  };
  auto row = [&](const std::string& name, const std::string& unit, Cell value,
                 const std::string& index_name, Cell index_value) {
    Cell index = index_name.empty() ? Cell{} : Cell{index_name};
    return std::vector<Cell>{name,  unit,  value, range(name), index, index_value,
                             index_name.empty() ? Cell{} : range(index_name)};
  };

  Table t;
  t.columns = {"Biomarker", "Unit", "Value", "95% CI", "Index", "Index Value", "Index 95% CI"};
  t.rows.push_back(row("EF", "%", r.ef_percent, "", {}));
  t.rows.push_back(row("EDV", "ml", r.edv_ml, "EDVi", cell(r.edvi)));
  t.rows.push_back(row("ESV", "ml", r.esv_ml, "ESVi", cell(r.esvi)));
  t.rows.push_back(row("SV", "ml", r.sv_ml, "SVi", cell(r.svi)));
  t.rows.push_back(row("MASS", "g", r.mass_g, "MASSi", cell(r.massi)));
  t.rows.push_back(row("CO", "L/min", cell(r.co_l_min), "CI", cell(r.ci)));
  t.rows.push_back(row("MCF", "%", r.mcf_percent, "", {}));
  doc.tables["sax_function"] = std::move(t);

  Table s;
  s.columns = {"Slice",       "Included ED", "Included ES",     "ED volume (ml)",
               "ES volume (ml)", "ED mass (g)", "Max wall thickness (mm)"};
  for (std::size_t i = 0; i < r.slice_idx.size(); ++i) {
    s.rows.push_back({std::to_string(r.slice_idx[i]), r.included_ed[i] ? 1.0 : 0.0,
                      r.included_es[i] ? 1.0 : 0.0, r.ed_blood.per_slice_ml[i],
                      r.es_blood.per_slice_ml[i], r.ed_myo.per_slice_ml[i] * kMyocardialDensity,
                      cell(r.wall_thickness_mm[i])});
  }
  doc.tables["sax_slices"] = std::move(s);

  auto& curve = doc.curves["lv_volume"];
  curve.x_unit = "phase";
  curve.y_unit = "ml";
  Series v;
  for (std::size_t p = 0; p < r.uncorrected_volumes_ml.size(); ++p) {
    v.x.push_back(static_cast<double>(p));
    v.y.push_back(r.uncorrected_volumes_ml[p]);
  }
  curve.series["uncorrected"] = std::move(v);

  doc.info["ed_phase"] = std::to_string(r.ed_phase);
  doc.info["es_phase"] = std::to_string(r.es_phase);
  for (const auto& f : r.flags) doc.flags.push_back(f);
}

}  // namespace icmr::cmr
