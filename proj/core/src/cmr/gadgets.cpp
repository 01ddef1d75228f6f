#include "icmr/cmr/gadgets.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "icmr/chain/gadget.hpp"
#include "icmr/cmr/lax.hpp"
#include "icmr/cmr/sax.hpp"

namespace icmr::cmr {

std::string serialize_sector_values(const SectorValues& values) {
  std::string out;
  char buf[64];
  for (std::size_t k = 0; k < kSectors; ++k) {
    if (values[k]) {
      std::snprintf(buf, sizeof buf, "%zu %.17g\n", k + 1, *values[k]);
    } else {
      std::snprintf(buf, sizeof buf, "%zu -\n", k + 1);
    }
    out += buf;
  }
  return out;
}

SectorValues parse_sector_values(const std::string& text) {
  SectorValues out;
  std::istringstream in(text);
  std::size_t k = 0;
  std::string value;
  while (in >> k >> value) {
    if (k < 1 || k > kSectors) throw PerfusionError("sector id out of range in stored sectors");
    if (value != "-") out[k - 1] = std::stod(value);
  }
  return out;
}

namespace {

using chain::Emitter;
using chain::GadgetContext;
using chain::Item;

wire::ImageFrame mask_frame(const SegmentationMask& mask, const std::string& model) {
  wire::ImageFrame f;
  f.header = mask.header;
  f.header.data_type = wire::PixelType::kLabel;
  f.meta.add("image_kind", "mask");
  f.meta.add("model", model);
  f.pixels = mask.labels;
  return f;
}

std::optional<double> session_double(const GadgetContext& ctx, const char* key) {
  if (!ctx.connection) return std::nullopt;
  return ctx.connection->session_header.get_double(key);
}

class AnalysisBase : public chain::Gadget {
 public:
  void configure(const GadgetContext& ctx) override {
    ctx_ = ctx;
    emit_masks_ = chain::property_bool(ctx.properties, "emit_masks", true);
  }

 protected:
  chain::SessionStore* store() const { return ctx_.connection ? ctx_.connection->store : nullptr; }
  std::string session_key() const { return ctx_.connection ? ctx_.connection->session_key() : ""; }
  std::string header_value(const char* key) const {
    if (!ctx_.connection) return "";
    return ctx_.connection->session_header.get(key).value_or("");
  }

  void emit_masks(const chain::InferenceResult& r, Emitter& out) const {
    if (!emit_masks_) return;
    for (const auto& m : r.masks) out.emit(mask_frame(m, r.model_id));
  }

  GadgetContext ctx_;
  bool emit_masks_ = true;
};

NormalRanges load_normal_ranges(const std::string& path, const std::string& sex) {
  NormalRanges ranges;
  if (path.empty()) return ranges;
  std::ifstream in(path);
  if (!in) throw chain::ConfigError("sax_analysis: cannot read normal_ranges file '" + path + "'");
  // sex,biomarker,low,high
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string s, name, lo, hi;
    if (!std::getline(fields, s, ',') || !std::getline(fields, name, ',') ||
        !std::getline(fields, lo, ',') || !std::getline(fields, hi)) {
      throw chain::ConfigError("sax_analysis: malformed normal_ranges line '" + line + "'");
    }
    if (s == sex || s == "any") ranges[name] = {std::stod(lo), std::stod(hi)};
  }
  return ranges;
}

class SaxAnalysisGadget : public AnalysisBase {
 public:
  void configure(const GadgetContext& ctx) override {
    AnalysisBase::configure(ctx);
    ranges_ = load_normal_ranges(chain::property_or(ctx.properties, "normal_ranges", ""),
                                 header_value("sex"));
  }

  void process(Item item, Emitter& out) override {
    auto* r = std::get_if<chain::InferenceResult>(&item);
    if (!r) {
      out.emit(std::move(item));
      return;
    }
    emit_masks(*r, out);
    for (auto& m : r->masks) {
      auto key = std::make_pair(m.header.phase_idx, m.header.slice_idx);
      masks_[key] = std::move(m);
    }
  }

  void flush(Emitter& out) override {
    if (masks_.empty()) {
      spdlog::info("sax_analysis: no masks received, no report");
      return;
    }
    std::map<std::uint16_t, std::vector<SegmentationMask>> by_phase;
    for (auto& [key, m] : masks_) by_phase[key.first].push_back(std::move(m));
    SaxInputs in;
    for (auto& [phase, stack] : by_phase) in.stacks.push_back(std::move(stack));
    in.heart_rate_bpm = session_double(ctx_, "heart_rate_bpm");
    in.bsa_m2 = session_double(ctx_, "bsa_m2");
    if (auto* s = store(); s && !session_key().empty()) {
      if (auto text = s->get(session_key(), kLaxArtifact)) in.lax = LaxGeometry::parse(*text);
    }
    auto report = sax_biomarkers(in);

    ReportDocument doc;
    doc.kind = "sax";
    add_sax_to_report(report, doc, ranges_);
    for (const char* key : {"heart_rate_bpm", "bsa_m2", "patient_key", "sex"}) {
      if (auto v = header_value(key); !v.empty()) doc.info[key] = v;
    }
    spdlog::info("sax_analysis: EF {:.1f}% EDV {:.1f} ml ESV {:.1f} ml", report.ef_percent,
                 report.edv_ml, report.esv_ml);
    out.emit(wire::Report{doc.serialize()});
  }

 private:
  NormalRanges ranges_;
  std::map<std::pair<std::uint16_t, std::uint16_t>, SegmentationMask> masks_;
};

class LaxAnalysisGadget : public AnalysisBase {
 public:
  void process(Item item, Emitter& out) override {
    auto* r = std::get_if<chain::InferenceResult>(&item);
    if (!r) {
      out.emit(std::move(item));
      return;
    }
    emit_masks(*r, out);
    for (std::size_t i = 0; i < r->landmarks.size(); ++i) {
      auto& set = r->landmarks[i];
      auto& view = views_[set.view];
      if (!view.header) view.header = r->group.frames.at(i).header;
      view.sets.push_back(std::move(set));
    }
  }

  void flush(Emitter& out) override {
    if (views_.empty()) {
      spdlog::info("lax_analysis: no landmarks received, no report");
      return;
    }
    ReportDocument doc;
    doc.kind = "lax";
    LaxGeometry geometry;
    Table points;
    points.columns = {"View", "Phase", "Landmark", "Row", "Col"};
    for (const auto& [v, data] : views_) {
      if (data.sets.size() >= 2) {
        add_lax_to_report(lax_biomarkers(data.sets, *data.header), doc);
      } else {
        doc.flags.push_back(std::string(view_name(v)) + ": fewer than 2 phases");
      }
      auto g = LaxGeometry::from_sets(data.sets, *data.header);
      geometry.entries.insert(geometry.entries.end(), g.entries.begin(), g.entries.end());
      for (const auto& s : data.sets) {
        for (const auto& [name, p] : s.points) {
          points.rows.push_back({std::string(view_name(v)), static_cast<double>(s.phase_idx), name,
                                 p.row, p.col});
        }
      }
    }
    doc.tables["lax_landmarks"] = std::move(points);
    if (auto* s = store(); s && !session_key().empty()) {
      s->put(session_key(), kLaxArtifact, geometry.serialize());
    } else {
      doc.flags.push_back("no session key: landmarks not stored for SAX");
    }
    out.emit(wire::Report{doc.serialize()});
  }

 private:
  struct ViewData {
    std::optional<wire::ImageHeader> header;
    std::vector<LandmarkSet> sets;
  };
  std::map<View, ViewData> views_;
};

class PerfAnalysisGadget : public AnalysisBase {
 public:
  void configure(const GadgetContext& ctx) override {
    AnalysisBase::configure(ctx);
    rotation_ = parse_rotation(chain::property_or(ctx.properties, "rotation", "ccw"));
    ptt_method_ = parse_ptt_method(chain::property_or(ctx.properties, "ptt_method", "centroid"));
  }

  void process(Item item, Emitter& out) override {
    auto* r = std::get_if<chain::InferenceResult>(&item);
    if (!r) {
      out.emit(std::move(item));
      return;
    }
    emit_masks(*r, out);
    if (r->group.frames.empty()) return;
    if (r->masks.size() != r->group.frames.size()) {
      throw PerfusionError("perf_analysis: model returned " + std::to_string(r->masks.size()) +
                           " masks for " + std::to_string(r->group.frames.size()) + " frames");
    }
    auto role = r->group.frames.front().meta.get("perf_role").value_or("flow");
    if (role == "aif") {
      add_aif(*r);
    } else if (role == "flow") {
      for (std::size_t i = 0; i < r->masks.size(); ++i) add_flow(r->group.frames[i], r->masks[i]);
    } else {
      throw PerfusionError("perf_analysis: unknown perf_role '" + role + "'");
    }
  }

  void flush(Emitter& out) override {
    if (flow_.empty() && !aif_) {
      spdlog::info("perf_analysis: nothing received, no report");
      return;
    }
    ReportDocument doc;
    doc.kind = "perf";
    auto stats = sector_stats(flow_, SectorMap{flow_.size(), 1, sectors_}, layers_);
    std::string scan = header_value("scan_kind");
    std::optional<SectorValues> rest;
    auto* s = store();
    const auto key = session_key();
    if (scan == "perf_stress") {
      if (s && !key.empty()) {
        if (auto text = s->get(key, kPerfRestArtifact)) rest = parse_sector_values(*text);
      }
      if (!rest) doc.flags.push_back("no rest scan linked: MPR unavailable");
    } else if (s && !key.empty()) {
      s->put(key, kPerfRestArtifact, serialize_sector_values(stats.mean));
    }
    add_perf_to_report(stats, rest, aif_, aif_times_, doc);
    doc.info["scan_kind"] = scan.empty() ? "perf_rest" : scan;
    for (const char* k : {"heart_rate_bpm", "respiratory_condition", "patient_key"}) {
      if (auto v = header_value(k); !v.empty()) doc.info[k] = v;
    }
    for (const auto& [cls, angle] : insertion_) doc.info["rv_insertion_deg_" + cls] = std::to_string(angle);
    doc.info["rotation"] = rotation_ == Rotation::kCcw ? "ccw" : "cw";
    doc.info["ptt_method"] = ptt_method_ == PttMethod::kCentroid ? "centroid" : "peak";
    out.emit(wire::Report{doc.serialize()});
  }

 private:
  void add_flow(const wire::ImageFrame& frame, const SegmentationMask& mask) {
    auto cls_text = frame.meta.get("slice_class").value_or("");
    auto cls = parse_slice_class(cls_text);
    auto insertion = find_rv_insertion(mask);
    auto sectors = split_sectors(mask, insertion.angle_deg, cls, rotation_);
    auto layers = split_endo_epi(mask);
    const auto& px = frame.magnitude();
    flow_.insert(flow_.end(), px.begin(), px.end());
    sectors_.insert(sectors_.end(), sectors.sector.begin(), sectors.sector.end());
    layers_.insert(layers_.end(), layers.begin(), layers.end());
    insertion_[cls_text] = insertion.angle_deg;
  }

  void add_aif(const chain::InferenceResult& r) {
    AifInputs in;
    for (const auto& f : r.group.frames) {
      in.frames.push_back(f.magnitude());
      in.times_ms.push_back(f.header.trigger_time_ms);
    }
    in.rv_mask = r.masks.front();
    in.lv_mask = r.masks.front();
    aif_ = aif_and_ptt(in, ptt_method_);
    aif_times_ = in.times_ms;
  }

  Rotation rotation_ = Rotation::kCcw;
  PttMethod ptt_method_ = PttMethod::kCentroid;
  std::vector<float> flow_;
  std::vector<std::uint16_t> sectors_, layers_;
  std::map<std::string, double> insertion_;
  std::optional<AifResult> aif_;
  std::vector<double> aif_times_;
};

}  // namespace

void register_analysis_gadgets(chain::GadgetRegistry& registry) {
  registry.add("sax_analysis", [] { return std::make_unique<SaxAnalysisGadget>(); });
  registry.add("lax_analysis", [] { return std::make_unique<LaxAnalysisGadget>(); });
  registry.add("perf_analysis", [] { return std::make_unique<PerfAnalysisGadget>(); });
}

}  // namespace icmr::cmr
