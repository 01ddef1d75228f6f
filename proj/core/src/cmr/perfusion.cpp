#include "icmr/cmr/perfusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace icmr::cmr {

SliceClass parse_slice_class(const std::string& text) {
  if (text == "basal") return SliceClass::kBasal;
  if (text == "mid") return SliceClass::kMid;
  if (text == "apical") return SliceClass::kApical;
  throw PerfusionError("unknown slice class '" + text + "'");
}

const char* slice_class_name(SliceClass c) {
  switch (c) {
    case SliceClass::kBasal:
      return "basal";
    case SliceClass::kMid:
      return "mid";
    case SliceClass::kApical:
      return "apical";
  }
  return "?";
}

Rotation parse_rotation(const std::string& text) {
  if (text == "ccw") return Rotation::kCcw;
  if (text == "cw") return Rotation::kCw;
  throw PerfusionError("rotation must be ccw or cw, got '" + text + "'");
}

PttMethod parse_ptt_method(const std::string& text) {
  if (text == "centroid") return PttMethod::kCentroid;
  if (text == "peak") return PttMethod::kPeak;
  throw PerfusionError("ptt_method must be centroid or peak, got '" + text + "'");
}

double pixel_angle_deg(double row, double col, double r0, double c0) {
  double a = std::atan2(-(row - r0), col - c0) * 180.0 / std::numbers::pi;
  if (a < 0) a += 360.0;
  if (a >= 360.0) a -= 360.0;
  return a;
}

Point2 blood_centroid(const SegmentationMask& mask) {
  double r0 = 0, c0 = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (mask.at(r, c) == label::kLvBlood) {
        r0 += static_cast<double>(r);
        c0 += static_cast<double>(c);
        ++n;
      }
    }
  }
  if (n == 0) throw PerfusionError("mask has no LV blood");
  return {r0 / static_cast<double>(n), c0 / static_cast<double>(n)};
}

RvInsertion find_rv_insertion(const SegmentationMask& mask) {
  auto centre = blood_centroid(mask);
  const long rows = static_cast<long>(mask.rows());
  const long cols = static_cast<long>(mask.cols());
  struct Candidate {
    double angle;
    Point2 p;
  };
  std::vector<Candidate> candidates;
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      if (mask.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) != label::kLvMyocardium) continue;
      bool touches = false;
      for (long dr = -1; dr <= 1 && !touches; ++dr) {
        for (long dc = -1; dc <= 1 && !touches; ++dc) {
          long rr = r + dr, cc = c + dc;
          if ((dr || dc) && rr >= 0 && cc >= 0 && rr < rows && cc < cols &&
              mask.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) == label::kRvBlood) {
            touches = true;
          }
        }
      }
      if (touches) {
        Point2 p{static_cast<double>(r), static_cast<double>(c)};
        candidates.push_back({pixel_angle_deg(p.row, p.col, centre.row, centre.col), p});
      }
    }
  }
  if (candidates.empty()) throw PerfusionError("RV not adjacent to LV myocardium");
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.angle < b.angle; });

  // The arc is the complement of the widest empty gap; its counterclockwise
  // end is the candidate where that gap begins.
  std::size_t end = candidates.size() - 1;
  double widest = candidates.front().angle + 360.0 - candidates.back().angle;
  for (std::size_t i = 0; i + 1 < candidates.size(); ++i) {
    double gap = candidates[i + 1].angle - candidates[i].angle;
    if (gap > widest) {
      widest = gap;
      end = i;
    }
  }
  return {candidates[end].p, candidates[end].angle};
}

SectorMap split_sectors(const SegmentationMask& mask, double insertion_angle_deg,
                        SliceClass slice_class, Rotation rotation) {
  auto centre = blood_centroid(mask);
  const int count = slice_class == SliceClass::kApical ? 4 : 6;
  const int base = slice_class == SliceClass::kBasal ? 0 : slice_class == SliceClass::kMid ? 6 : 12;
  const double width = 360.0 / count;
  SectorMap out{mask.rows(), mask.cols(), std::vector<std::uint16_t>(mask.labels.size(), 0)};
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (mask.at(r, c) != label::kLvMyocardium) continue;
      double a = pixel_angle_deg(static_cast<double>(r), static_cast<double>(c), centre.row, centre.col);
      double rel = rotation == Rotation::kCcw ? a - insertion_angle_deg : insertion_angle_deg - a;
      rel = std::fmod(rel, 360.0);
      if (rel < 0) rel += 360.0;
      int idx = std::min(count - 1, static_cast<int>(rel / width));
      out.sector[r * mask.cols() + c] = static_cast<std::uint16_t>(base + idx + 1);
    }
  }
  return out;
}

namespace {

constexpr double kFar = 1e20;

// 1D squared distance transform of f (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<std::size_t>& v,
            std::vector<double>& z) {
  const std::size_t n = f.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto intersect = [&](std::size_t q, std::size_t p) {
    double dq = static_cast<double>(q), dp = static_cast<double>(p);
    return ((f[q] + dq * dq) - (f[p] + dp * dp)) / (2.0 * (dq - dp));
  };
  std::size_t k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (std::size_t q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    double diff = static_cast<double>(q) - static_cast<double>(v[k]);
    d[q] = diff * diff + f[v[k]];
  }
}

// Squared Euclidean distance to the nearest feature pixel; exact for the
// integer distances that occur.
std::vector<double> squared_distance(const std::vector<bool>& feature, std::size_t rows,
                                     std::size_t cols) {
  std::vector<double> grid(rows * cols);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = feature[i] ? 0.0 : kFar;
  std::size_t n = std::max(rows, cols);
  std::vector<double> f, d, z(n + 1);
  std::vector<std::size_t> v(n);
  f.resize(rows);
  d.resize(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) f[r] = grid[r * cols + c];
    edt_1d(f, d, v, z);
    for (std::size_t r = 0; r < rows; ++r) grid[r * cols + c] = d[r];
  }
  f.resize(cols);
  d.resize(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) f[c] = grid[r * cols + c];
    edt_1d(f, d, v, z);
    for (std::size_t c = 0; c < cols; ++c) grid[r * cols + c] = d[c];
  }
  return grid;
}

}  // namespace

std::vector<std::uint16_t> split_endo_epi(const SegmentationMask& mask) {
  const std::size_t rows = mask.rows();
  const std::size_t cols = mask.cols();
  std::vector<bool> endo_edge(rows * cols, false), epi_edge(rows * cols, false);
  bool any_endo = false, any_epi = false;
  auto outside = [](std::uint16_t l) { return l != label::kLvBlood && l != label::kLvMyocardium; };
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask.at(r, c) != label::kLvMyocardium) continue;
      const long offsets[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
      for (const auto& o : offsets) {
        long rr = static_cast<long>(r) + o[0];
        long cc = static_cast<long>(c) + o[1];
        std::uint16_t l = (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols))
                              ? label::kBackground
                              : mask.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        if (l == label::kLvBlood) {
          endo_edge[r * cols + c] = true;
          any_endo = true;
        } else if (outside(l)) {
          epi_edge[r * cols + c] = true;
          any_epi = true;
        }
      }
    }
  }
  if (!any_endo) throw PerfusionError("myocardium has no endocardial boundary");
  if (!any_epi) throw PerfusionError("myocardium has no epicardial boundary");
  auto d_endo = squared_distance(endo_edge, rows, cols);
  auto d_epi = squared_distance(epi_edge, rows, cols);
  std::vector<std::uint16_t> layers(rows * cols, 0);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (mask.labels[i] != label::kLvMyocardium) continue;
    layers[i] = d_endo[i] < d_epi[i] ? kLayerEndo : kLayerEpi;
  }
  return layers;
}

SectorStats sector_stats(const std::vector<float>& flow, const SectorMap& sectors,
                         const std::vector<std::uint16_t>& layers) {
  if (flow.size() != sectors.sector.size() || layers.size() != sectors.sector.size()) {
    throw PerfusionError("flow map, sectors and layers differ in size");
  }
  std::array<double, kSectors> sum{}, endo_sum{}, epi_sum{};
  std::array<std::size_t, kSectors> n{}, endo_n{}, epi_n{};
  for (std::size_t i = 0; i < flow.size(); ++i) {
    auto s = sectors.sector[i];
    if (s == 0) continue;
    if (s > kSectors) throw PerfusionError("sector id out of range");
    std::size_t k = s - 1u;
    sum[k] += flow[i];
    ++n[k];
    if (layers[i] == kLayerEndo) {
      endo_sum[k] += flow[i];
      ++endo_n[k];
    } else if (layers[i] == kLayerEpi) {
      epi_sum[k] += flow[i];
      ++epi_n[k];
    }
  }
  SectorStats out;
  for (std::size_t k = 0; k < kSectors; ++k) {
    out.pixels[k] = n[k];
    if (n[k]) out.mean[k] = sum[k] / static_cast<double>(n[k]);
    if (endo_n[k]) out.endo[k] = endo_sum[k] / static_cast<double>(endo_n[k]);
    if (epi_n[k]) out.epi[k] = epi_sum[k] / static_cast<double>(epi_n[k]);
  }
  return out;
}

SectorValues perfusion_reserve(const SectorValues& stress, const SectorValues& rest) {
  SectorValues out;
  for (std::size_t k = 0; k < kSectors; ++k) {
    if (stress[k] && rest[k] && *rest[k] >= kMprRestFloor) out[k] = *stress[k] / *rest[k];
  }
  return out;
}

std::vector<double> baseline_corrected(const std::vector<double>& signal) {
  if (signal.size() < 3) throw PerfusionError("AIF curve shorter than the 3-frame baseline");
  double baseline = (signal[0] + signal[1] + signal[2]) / 3.0;
  std::vector<double> out;
  out.reserve(signal.size());
  for (double s : signal) out.push_back(std::max(0.0, s - baseline));
  return out;
}

FirstPassWindow first_pass_window(const std::vector<double>& s) {
  auto peak_it = std::max_element(s.begin(), s.end());
  if (peak_it == s.end() || *peak_it <= 0.0) throw PerfusionError("AIF curve is all zero after baseline");
  const double peak = *peak_it;
  const auto peak_idx = static_cast<std::size_t>(peak_it - s.begin());
  FirstPassWindow w;
  w.begin = 0;
  while (w.begin < s.size() && !(s[w.begin] > 0.2 * peak)) ++w.begin;
  w.end = s.size();
  for (std::size_t i = peak_idx + 1; i < s.size(); ++i) {
    if (s[i] < 0.1 * peak) {
      w.end = i;
      break;
    }
  }
  return w;
}

namespace {

double arrival_time_ms(const std::vector<double>& t, const std::vector<double>& s, PttMethod method) {
  auto w = first_pass_window(s);
  if (method == PttMethod::kPeak) {
    auto peak = std::max_element(s.begin(), s.end()) - s.begin();
    return t[static_cast<std::size_t>(peak)];
  }
  double num = 0, den = 0;
  for (std::size_t i = w.begin; i < w.end; ++i) {
    num += t[i] * s[i];
    den += s[i];
  }
  return num / den;
}

}  // namespace

AifResult ptt_from_curves(const std::vector<double>& t_rv, const std::vector<double>& rv,
                          const std::vector<double>& t_lv, const std::vector<double>& lv,
                          PttMethod method) {
  if (t_rv.size() != rv.size() || t_lv.size() != lv.size()) {
    throw PerfusionError("AIF times and samples differ in length");
  }
  if (rv.size() < 8 || lv.size() < 8) throw PerfusionError("AIF needs at least 8 frames");
  AifResult out;
  out.rv_signal = baseline_corrected(rv);
  out.lv_signal = baseline_corrected(lv);
  out.ptt_s = (arrival_time_ms(t_lv, out.lv_signal, method) -
               arrival_time_ms(t_rv, out.rv_signal, method)) /
              1000.0;
  return out;
}

std::vector<double> mask_mean_curve(const std::vector<std::vector<float>>& frames,
                                    const SegmentationMask& mask, std::uint16_t code) {
  std::vector<std::size_t> pixels;
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    if (mask.labels[i] == code) pixels.push_back(i);
  }
  if (pixels.empty()) throw PerfusionError("AIF mask is empty");
  std::vector<double> curve;
  for (const auto& f : frames) {
    if (f.size() != mask.labels.size()) throw PerfusionError("AIF frame and mask differ in size");
    double sum = 0;
    for (auto i : pixels) sum += f[i];
    curve.push_back(sum / static_cast<double>(pixels.size()));
  }
  return curve;
}

AifResult aif_and_ptt(const AifInputs& in, PttMethod method) {
  if (in.frames.size() != in.times_ms.size()) throw PerfusionError("AIF frames and times differ");
  auto rv = mask_mean_curve(in.frames, in.rv_mask, label::kRvBlood);
  auto lv = mask_mean_curve(in.frames, in.lv_mask, label::kLvBlood);
  return ptt_from_curves(in.times_ms, rv, in.times_ms, lv, method);
}

void add_perf_to_report(const SectorStats& stats, const std::optional<SectorValues>& rest,
                        const std::optional<AifResult>& aif, const std::vector<double>& aif_times_ms,
                        ReportDocument& doc) {
  Table sectors;
  sectors.columns = {"Sector", "Mean", "Endo", "Epi", "Pixels"};
  for (std::size_t k = 0; k < kSectors; ++k) {
    sectors.rows.push_back({std::to_string(k + 1), cell(stats.mean[k]), cell(stats.endo[k]),
                            cell(stats.epi[k]), static_cast<double>(stats.pixels[k])});
  }
  doc.tables["perf_sectors"] = std::move(sectors);

  if (rest) {
    auto mpr = perfusion_reserve(stats.mean, *rest);
    Table t;
    t.columns = {"Sector", "Stress", "Rest", "MPR"};
    for (std::size_t k = 0; k < kSectors; ++k) {
      t.rows.push_back({std::to_string(k + 1), cell(stats.mean[k]), cell((*rest)[k]), cell(mpr[k])});
      if (!mpr[k]) doc.flags.push_back("MPR absent for sector " + std::to_string(k + 1));
    }
    doc.tables["perf_mpr"] = std::move(t);
  }

  if (aif) {
    auto& curve = doc.curves["perf_aif"];
    curve.x_unit = "ms";
    curve.y_unit = "signal";
    curve.series["RV"] = {aif_times_ms, aif->rv_signal};
    curve.series["LV"] = {aif_times_ms, aif->lv_signal};
    Table t;
    t.columns = {"Quantity", "Value", "Unit"};
    t.rows.push_back({std::string("PTT"), aif->ptt_s, std::string("s")});
    doc.tables["perf_ptt"] = std::move(t);
  }
}

}  // namespace icmr::cmr
