#include "icmr/cmr/lax.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

namespace icmr::cmr {

namespace {

const Point2& point(const LandmarkSet& set, const std::string& name) {
  auto it = set.points.find(name);
  if (it == set.points.end()) {
    throw LaxError(std::string("landmark '") + name + "' missing in " + view_name(set.view) +
                   " phase " + std::to_string(set.phase_idx));
  }
  return it->second;
}

Vec3 mitral_mid(const LandmarkSet& set, const wire::ImageHeader& h) {
  return 0.5 * (to_patient_coords(point(set, "mv1"), h) + to_patient_coords(point(set, "mv2"), h));
}

}  // namespace

double lv_length(const LandmarkSet& set, const wire::ImageHeader& h) {
  return norm(mitral_mid(set, h) - to_patient_coords(point(set, "apex"), h));
}

LaxViewReport lax_biomarkers(std::vector<LandmarkSet> sets, const wire::ImageHeader& h) {
  if (sets.size() < 2) throw LaxError("LAX analysis needs at least 2 phases");
  for (const auto& s : sets) {
    if (s.view != sets.front().view) throw LaxError("LAX analysis mixes views");
  }
  std::stable_sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) {
    return a.trigger_time_ms < b.trigger_time_ms;
  });

  LaxViewReport out;
  out.view = sets.front().view;
  for (const auto& s : sets) {
    out.trigger_times_ms.push_back(s.trigger_time_ms);
    out.phases.push_back(s.phase_idx);
    out.length_mm.push_back(lv_length(s, h));
  }
  const auto& L = out.length_mm;
  out.ed = static_cast<std::size_t>(std::max_element(L.begin(), L.end()) - L.begin());
  out.es = static_cast<std::size_t>(std::min_element(L.begin(), L.end()) - L.begin());
  if (L[out.ed] <= 0.0) throw LaxError("all LV lengths are zero");

  for (double l : L) out.shortening_percent.push_back(100.0 * (L[out.ed] - l) / L[out.ed]);
  out.gls_percent = out.shortening_percent[out.es];

  const auto& ed = sets[out.ed];
  const auto& es = sets[out.es];
  Vec3 m_ed = mitral_mid(ed, h);
  Vec3 axis = to_patient_coords(point(ed, "apex"), h) - m_ed;
  Vec3 u = (1.0 / norm(axis)) * axis;
  out.mapse_mm = dot(mitral_mid(es, h) - m_ed, u);
  if (out.view == View::kCh4 && ed.points.contains("tv_lat") && es.points.contains("tv_lat")) {
    out.tapse_mm = dot(to_patient_coords(point(es, "tv_lat"), h) -
                           to_patient_coords(point(ed, "tv_lat"), h),
                       u);
  }
  return out;
}

LaxGeometry LaxGeometry::from_sets(const std::vector<LandmarkSet>& sets, const wire::ImageHeader& h) {
  LaxGeometry g;
  for (const auto& s : sets) {
    Entry e{s.view, s.phase_idx, s.trigger_time_ms, {}};
    for (const auto& [name, p] : s.points) e.points[name] = to_patient_coords(p, h);
    g.entries.push_back(std::move(e));
  }
  return g;
}

const LaxGeometry::Entry* LaxGeometry::nearest(View view, double trigger_time_ms) const {
  const Entry* best = nullptr;
  double best_dt = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) {
    double dt = std::abs(e.trigger_time_ms - trigger_time_ms);
    if (e.view == view && dt < best_dt) {
      best = &e;
      best_dt = dt;
    }
  }
  return best;
}

// One line per point: "VIEW phase time name x y z".
std::string LaxGeometry::serialize() const {
  std::string out;
  char buf[256];
  for (const auto& e : entries) {
    for (const auto& [name, p] : e.points) {
      std::snprintf(buf, sizeof buf, "%s %u %.17g %s %.17g %.17g %.17g\n", view_name(e.view),
                    static_cast<unsigned>(e.phase_idx), e.trigger_time_ms, name.c_str(), p[0], p[1],
                    p[2]);
      out += buf;
    }
  }
  return out;
}

LaxGeometry LaxGeometry::parse(const std::string& text) {
  LaxGeometry g;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string view_text, name;
    unsigned phase = 0;
    double t = 0;
    Vec3 p{};
    if (!(fields >> view_text >> phase >> t >> name >> p[0] >> p[1] >> p[2])) {
      throw LaxError("malformed LAX geometry line '" + line + "'");
    }
    auto view = parse_view(view_text);
    if (!view) throw LaxError("unknown view '" + view_text + "'");
    auto it = std::find_if(g.entries.begin(), g.entries.end(), [&](const Entry& e) {
      return e.view == *view && e.phase_idx == phase;
    });
    if (it == g.entries.end()) {
      g.entries.push_back({*view, static_cast<std::uint16_t>(phase), t, {}});
      it = std::prev(g.entries.end());
    }
    it->points[name] = p;
  }
  return g;
}

void add_lax_to_report(const LaxViewReport& v, ReportDocument& doc) {
  std::string label = view_name(v.view);
  std::string table_name = v.view == View::kCh4 ? "lax_ch4" : "lax_ch2";
  Table t;
  t.columns = {"Biomarker", "Value", "Unit"};
  t.rows.push_back({std::string("GLS"), v.gls_percent, std::string("%")});
  t.rows.push_back({std::string("MAPSE"), v.mapse_mm, std::string("mm")});
  if (v.view == View::kCh4) t.rows.push_back({std::string("TAPSE"), cell(v.tapse_mm), std::string("mm")});
  t.rows.push_back({std::string("L_ED"), v.length_mm[v.ed], std::string("mm")});
  t.rows.push_back({std::string("L_ES"), v.length_mm[v.es], std::string("mm")});
  t.rows.push_back({std::string("ED phase"), static_cast<double>(v.phases[v.ed]), std::string("")});
  t.rows.push_back({std::string("ES phase"), static_cast<double>(v.phases[v.es]), std::string("")});
  doc.tables[table_name] = std::move(t);

  auto& length = doc.curves["lv_length"];
  length.x_unit = "ms";
  length.y_unit = "mm";
  length.series[label] = {v.trigger_times_ms, v.length_mm};
  auto& gls = doc.curves["gl_shortening"];
  gls.x_unit = "ms";
  gls.y_unit = "%";
  gls.series[label] = {v.trigger_times_ms, v.shortening_percent};
}

}  // namespace icmr::cmr
