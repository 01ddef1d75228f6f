#include "icmr/sim/verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "icmr/cmr/render.hpp"
#include "icmr/cmr/report.hpp"
#include "icmr/sim/client.hpp"
#include "icmr/sim/phantom.hpp"

namespace icmr::sim {

namespace fs = std::filesystem;

double Tolerances::get(const std::string& key) const {
  if (auto v = find(key)) return *v;
  static const Tolerances fallback = defaults();
  auto it = fallback.values.find(key);
  if (it == fallback.values.end()) throw SimError("no tolerance named '" + key + "'");
  return it->second;
}

std::optional<double> Tolerances::find(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) return std::nullopt;
  return it->second;
}

Tolerances Tolerances::defaults() {
  return {{{"sax.edv_rel", 0.03},
           {"sax.esv_rel", 0.03},
           {"sax.ef_abs", 1.0},
           {"sax.mass_rel", 0.10},
           {"lax.gls_abs", 0.1},
           {"lax.mapse_abs", 0.5},
           {"lax.tapse_abs", 0.5},
           {"perf.flow_abs", 0.1},
           {"perf.mpr_abs", 0.1},
           {"perf.ptt_abs", 0.5}}};
}

Tolerances Tolerances::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot read tolerance file " + path.string());
  Tolerances t;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    auto trim = [](std::string s) {
      const char* ws = " \t\r";
      s.erase(0, s.find_first_not_of(ws));
      s.erase(s.find_last_not_of(ws) + 1);
      return s;
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) {
      throw SimError(path.string() + ":" + std::to_string(no) + ": expected key = value");
    }
    try {
      t.values[trim(line.substr(0, eq))] = std::stod(trim(line.substr(eq + 1)));
    } catch (const std::logic_error&) {
      throw SimError(path.string() + ":" + std::to_string(no) + ": value is not a number");
    }
  }
  return t;
}

bool Verdict::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string Verdict::to_json() const {
  auto opt = [](std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["kind"] = kind;
  j["pass"] = pass();
  auto arr = nlohmann::json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"expected", opt(c.expected)},
                   {"actual", opt(c.actual)},
                   {"tolerance", opt(c.tolerance)},
                   {"pass", c.pass},
                   {"note", c.note}});
  }
  j["checks"] = std::move(arr);
  j["artifacts"] = artifacts;
  return j.dump(2);
}

std::string Verdict::summary() const {
  std::ostringstream out;
  out << "kind: " << kind << "\nverdict: " << (pass() ? "PASS" : "FAIL") << "\n";
  for (const auto& c : checks) {
    out << (c.pass ? "  ok    " : "  FAIL  ") << c.name;
    if (c.actual) out << "  actual=" << *c.actual;
    if (c.expected) out << "  expected=" << *c.expected;
    if (c.tolerance) out << "  tol=" << *c.tolerance;
    if (!c.note.empty()) out << "  (" << c.note << ")";
    out << "\n";
  }
  for (const auto& a : artifacts) out << "wrote " << a << "\n";
  return out.str();
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Checker {
 public:
  explicit Checker(Verdict& v) : v_(v) {}

  void near_abs(const std::string& name, std::optional<double> actual, double expected, double tol) {
    Check c{name, expected, actual, tol, false, ""};
    if (!actual) {
      c.note = "value missing";
    } else {
      c.pass = std::abs(*actual - expected) <= tol;
    }
    v_.checks.push_back(c);
  }

  void near_rel(const std::string& name, std::optional<double> actual, double expected, double rel) {
    Check c{name, expected, actual, rel, false, "relative"};
    if (!actual) {
      c.note = "value missing";
    } else {
      c.pass = std::abs(*actual - expected) <= rel * std::abs(expected);
    }
    v_.checks.push_back(c);
  }

  void truth(const std::string& name, bool ok, const std::string& note = "") {
    v_.checks.push_back({name, std::nullopt, std::nullopt, std::nullopt, ok, note});
  }

 private:
  Verdict& v_;
};

std::optional<double> number(const cmr::Table& t, const std::string& row, const std::string& col) {
  try {
    return t.number(row, col);
  } catch (const std::out_of_range&) {
    return std::nullopt;
  }
}

const cmr::ReportDocument* find_report(const std::vector<cmr::ReportDocument>& reports, const std::string& kind) {
  for (const auto& r : reports) {
    if (r.kind == kind) return &r;
  }
  return nullptr;
}

const cmr::Table* find_table(const cmr::ReportDocument* doc, const std::string& name, Checker& check) {
  if (!doc) return nullptr;
  auto it = doc->tables.find(name);
  if (it == doc->tables.end()) {
    check.truth("table " + name, false, "missing report table '" + name + "'");
    return nullptr;
  }
  return &it->second;
}

using FrameKey = std::tuple<std::uint16_t, std::uint16_t, std::uint16_t>;  // series, slice, phase

struct Received {
  std::map<FrameKey, const wire::ImageFrame*> images;
  std::map<FrameKey, const wire::ImageFrame*> masks;
};

Received index_frames(const std::vector<wire::Message>& messages) {
  Received out;
  for (const auto& m : messages) {
    auto* f = std::get_if<wire::ImageFrame>(&m);
    if (!f) continue;
    FrameKey key{f->header.series_idx, f->header.slice_idx, f->header.phase_idx};
    if (f->meta.get("image_kind").value_or("") == "mask") {
      out.masks[key] = f;
    } else {
      out.images[key] = f;
    }
  }
  return out;
}

cmr::MosaicTile tile_for(const wire::ImageFrame& image, const Received& rx, const std::string& label) {
  cmr::MosaicTile t;
  t.rows = image.header.rows;
  t.cols = image.header.cols;
  t.pixels = image.magnitude();
  FrameKey key{image.header.series_idx, image.header.slice_idx, image.header.phase_idx};
  if (auto it = rx.masks.find(key); it != rx.masks.end()) {
    t.mask = cmr::SegmentationMask{it->second->header, it->second->labels()};
  }
  t.labels.push_back(label);
  return t;
}

void cross(cmr::MosaicTile& t, double row, double col) {
  t.lines.push_back({{row - 3, col}, {row + 3, col}});
  t.lines.push_back({{row, col - 3}, {row, col + 3}});
}

void verify_sax(const GroundTruth& truth, const std::vector<cmr::ReportDocument>& reports, const Received* rx,
                const Tolerances& tol, Checker& check) {
  const auto* doc = find_report(reports, "sax");
  check.truth("report sax", doc != nullptr, doc ? "" : "missing report 'sax'");
  if (const auto* t = find_table(doc, "sax_function", check)) {
    auto edv = number(*t, "EDV", "Value"), esv = number(*t, "ESV", "Value");
    check.near_rel("EDV", edv, truth.edv_ml, tol.get("sax.edv_rel"));
    check.near_rel("ESV", esv, truth.esv_ml, tol.get("sax.esv_rel"));
    check.near_abs("EF", number(*t, "EF", "Value"), truth.ef_percent, tol.get("sax.ef_abs"));
    check.near_rel("MASS", number(*t, "MASS", "Value"), truth.mass_g, tol.get("sax.mass_rel"));
    if (const auto* s = find_table(doc, "sax_slices", check)) {
      auto sum = [&](const std::string& col) {
        double total = 0.0;
        const auto c = s->column(col);
        for (const auto& row : s->rows) {
          if (auto* v = std::get_if<double>(&row[c])) total += *v;
        }
        return total;
      };
      check.truth("EDV per-slice sum", edv && sum("ED volume (ml)") == *edv);
      check.truth("ESV per-slice sum", esv && sum("ES volume (ml)") == *esv);
    }
  }
  if (rx) {
    check.near_abs("reconstructed frames", static_cast<double>(rx->images.size()),
                   static_cast<double>(truth.expected_frames), 0.0);
  }
}

void verify_lax(const GroundTruth& truth, const std::vector<cmr::ReportDocument>& reports, const Tolerances& tol,
                Checker& check) {
  const auto* doc = find_report(reports, "lax");
  check.truth("report lax", doc != nullptr, doc ? "" : "missing report 'lax'");
  for (const auto& [view, gls] : truth.gls_percent) {
    std::string lower = view;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    const auto* t = find_table(doc, "lax_" + lower, check);
    if (!t) continue;
    check.near_abs(view + " GLS", number(*t, "GLS", "Value"), gls, tol.get("lax.gls_abs"));
    check.near_abs(view + " MAPSE", number(*t, "MAPSE", "Value"), truth.mapse_mm.at(view), tol.get("lax.mapse_abs"));
    if (view == "CH4" && truth.tapse_mm) {
      check.near_abs("CH4 TAPSE", number(*t, "TAPSE", "Value"), *truth.tapse_mm, tol.get("lax.tapse_abs"));
    }
  }
}

void verify_perf(const GroundTruth& truth, const std::vector<cmr::ReportDocument>& reports, const Tolerances& tol,
                 Checker& check) {
  const auto* doc = find_report(reports, "perf");
  check.truth("report perf", doc != nullptr, doc ? "" : "missing report 'perf'");
  if (const auto* t = find_table(doc, "perf_sectors", check)) {
    for (std::size_t k = 0; k < cmr::kSectors; ++k) {
      if (!truth.flow[k]) continue;
      const auto id = std::to_string(k + 1);
      check.near_abs("flow sector " + id, number(*t, id, "Mean"), *truth.flow[k], tol.get("perf.flow_abs"));
    }
  }
  if (truth.mpr) {
    if (const auto* t = find_table(doc, "perf_mpr", check)) {
      for (std::size_t k = 0; k < cmr::kSectors; ++k) {
        const auto id = std::to_string(k + 1);
        check.near_abs("MPR sector " + id, number(*t, id, "MPR"), *(*truth.mpr)[k], tol.get("perf.mpr_abs"));
      }
    }
  }
  if (truth.ptt_s) {
    if (const auto* t = find_table(doc, "perf_ptt", check)) {
      check.near_abs("PTT", number(*t, "PTT", "Value"), *truth.ptt_s, tol.get("perf.ptt_abs"));
    }
  }
}

std::optional<std::size_t> info_index(const cmr::ReportDocument* doc, const std::string& key) {
  if (!doc) return std::nullopt;
  auto it = doc->info.find(key);
  if (it == doc->info.end()) return std::nullopt;
  try {
    return static_cast<std::size_t>(std::stoul(it->second));
  } catch (const std::logic_error&) {
    return std::nullopt;
  }
}

void render_all(const fs::path& dir, const GroundTruth& truth, const std::vector<cmr::ReportDocument>& reports,
                const Received* rx, Verdict& verdict) {
  auto save = [&](const std::string& name, const cmr::Raster& r) {
    if (r.empty()) return;
    cmr::write_png((dir / name).string(), r);
    verdict.artifacts.push_back(name);
  };
  for (const auto& doc : reports) {
    for (const auto& [name, curve] : doc.curves) save("curve_" + name + ".png", cmr::render_curve(curve, name));
  }
  if (const auto* perf = find_report(reports, "perf")) {
    auto values = [&](const std::string& table, const std::string& col) {
      cmr::SectorValues v;
      auto it = perf->tables.find(table);
      if (it == perf->tables.end()) return std::optional<cmr::SectorValues>{};
      for (std::size_t k = 0; k < cmr::kSectors; ++k) v[k] = number(it->second, std::to_string(k + 1), col);
      return std::optional<cmr::SectorValues>{v};
    };
    if (auto v = values("perf_sectors", "Mean")) save("bullseye_flow.png", cmr::render_bullseye(*v, "flow ml/min/g"));
    if (auto v = values("perf_mpr", "MPR")) save("bullseye_mpr.png", cmr::render_bullseye(*v, "MPR"));
  }
  if (!rx || rx->images.empty()) return;

  std::vector<cmr::MosaicTile> tiles;
  switch (truth.kind) {
    case SessionKind::kSax: {
      const auto* doc = find_report(reports, "sax");
      for (auto [phase, name] : {std::pair{info_index(doc, "ed_phase").value_or(truth.ed_phase), "ed"},
                                 std::pair{info_index(doc, "es_phase").value_or(truth.es_phase), "es"}}) {
        tiles.clear();
        for (const auto& [key, image] : rx->images) {
          if (std::get<2>(key) != phase) continue;
          tiles.push_back(tile_for(*image, *rx, "S" + std::to_string(std::get<1>(key)) + " P" + std::to_string(phase)));
        }
        if (!tiles.empty()) save(std::string("mosaic_") + name + ".png", cmr::render_mosaic(tiles));
      }
      return;
    }
    case SessionKind::kLax: {
      const auto* doc = find_report(reports, "lax");
      const cmr::Table* points = nullptr;
      if (doc) {
        if (auto it = doc->tables.find("lax_landmarks"); it != doc->tables.end()) points = &it->second;
      }
      for (const auto& [key, image] : rx->images) {
        auto view = image->meta.get("view").value_or("?");
        auto tile = tile_for(*image, *rx, view + " P" + std::to_string(std::get<2>(key)));
        if (points) {
          for (const auto& row : points->rows) {
            auto* v = std::get_if<std::string>(&row[0]);
            auto* ph = std::get_if<double>(&row[1]);
            auto* r = std::get_if<double>(&row[3]);
            auto* c = std::get_if<double>(&row[4]);
            if (v && ph && r && c && *v == view && static_cast<std::uint16_t>(*ph) == std::get<2>(key)) {
              cross(tile, *r, *c);
            }
          }
        }
        tiles.push_back(std::move(tile));
      }
      save("mosaic.png", cmr::render_mosaic(tiles));
      return;
    }
    case SessionKind::kPerfRest:
    case SessionKind::kPerfStress: {
      for (const auto& [key, image] : rx->images) {
        if (image->meta.get("perf_role").value_or("") != "flow") continue;
        tiles.push_back(tile_for(*image, *rx, image->meta.get("slice_class").value_or("?")));
      }
      if (!tiles.empty()) save("mosaic.png", cmr::render_mosaic(tiles));
      return;
    }
  }
}

}  // namespace

Verdict verify_run(const fs::path& run_dir, const Tolerances& tol, const VerifyOptions& options) {
  auto session = nlohmann::json::parse(read_file(run_dir / "session.json"));
  const auto truth = GroundTruth::from_json(session.at("truth").dump());
  Verdict verdict;
  verdict.kind = session_kind_name(truth.kind);
  Checker check(verdict);

  if (!session.at("client_error").is_null()) {
    check.truth("client run", false, session["client_error"].get<std::string>());
  } else {
    check.truth("client run", true);
  }

  std::vector<std::pair<std::size_t, fs::path>> report_files;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("report_", 0) == 0 && entry.path().extension() == ".json") {
      report_files.emplace_back(std::stoul(name.substr(7)), entry.path());
    }
  }
  std::sort(report_files.begin(), report_files.end());
  std::vector<cmr::ReportDocument> reports;
  for (const auto& [k, path] : report_files) {
    try {
      reports.push_back(cmr::ReportDocument::parse(read_file(path)));
    } catch (const std::exception& e) {
      check.truth(path.filename().string() + " parses", false, e.what());
    }
  }

  std::vector<wire::Message> captured;
  std::optional<Received> rx;
  if (fs::exists(run_dir / "capture_received.icsp")) {
    captured = read_capture(run_dir / "capture_received.icsp");
    rx = index_frames(captured);
  }

  switch (truth.kind) {
    case SessionKind::kSax: verify_sax(truth, reports, rx ? &*rx : nullptr, tol, check); break;
    case SessionKind::kLax: verify_lax(truth, reports, tol, check); break;
    case SessionKind::kPerfRest:
    case SessionKind::kPerfStress: verify_perf(truth, reports, tol, check); break;
  }

  if (auto expect = tol.find("overlap.expect")) {
    auto timing = nlohmann::json::parse(read_file(run_dir / "timing.json"));
    auto at = [&](const char* key) {
      const auto& v = timing.at(key);
      return v.is_null() ? std::optional<double>{} : std::optional<double>{v.get<double>()};
    };
    const auto last = at("last_acquisition_ms");
    if (*expect != 0.0) {
      const auto first = at("first_image_ms");
      check.truth("overlap: first image before last acquisition", first && last && *first < *last);
    } else {
      const auto first = at("first_result_ms");
      check.truth("no overlap: first result after last acquisition", first && last && *first > *last);
    }
  }

  if (options.render) render_all(run_dir, truth, reports, rx ? &*rx : nullptr, verdict);

  std::ofstream(run_dir / "verdict.json", std::ios::trunc) << verdict.to_json() << '\n';
  std::ofstream(run_dir / "summary.txt", std::ios::trunc) << verdict.summary();
  return verdict;
}

}  // namespace icmr::sim
