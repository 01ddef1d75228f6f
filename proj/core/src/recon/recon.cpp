#include "icmr/recon/recon.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include "icmr/chain/gadget.hpp"

namespace icmr::recon {

GeometryDefaults GeometryDefaults::from_session_header(const wire::MetaAttributes& header) {
  GeometryDefaults g;
  g.fov_read_mm = header.get_double("fov_read_mm").value_or(g.fov_read_mm);
  g.fov_phase_mm = header.get_double("fov_phase_mm").value_or(g.fov_phase_mm);
  g.slice_thickness_mm = header.get_double("slice_thickness_mm").value_or(g.slice_thickness_mm);
  g.slice_spacing_mm = header.get_double("slice_spacing_mm").value_or(g.slice_spacing_mm);
  if (auto interval = header.get_double("phase_interval_ms")) {
    g.phase_interval_ms = *interval;
  } else {
    auto hr = header.get_double("heart_rate_bpm");
    auto phases = header.get_double("n_phases");
    if (hr && phases && *hr > 0.0 && *phases > 0.0) g.phase_interval_ms = 60000.0 / *hr / *phases;
  }
  return g;
}

namespace {

struct CellGrid {
  const wire::ReadoutHeader* first = nullptr;
  // [coil][kline][sample]
  std::vector<std::complex<float>> data;
  std::vector<bool> filled;  // per kline
};

}  // namespace

std::vector<wire::ImageFrame> recon_bucket(const stages::KSpaceBucket& bucket,
                                           const GeometryDefaults& geometry, ReconStats* stats) {
  if (bucket.readouts.empty()) throw ReconError("recon: empty bucket");
  const auto ext = bucket.extents();
  const std::size_t klines = ext.klines;
  const std::size_t samples = ext.samples;
  const std::size_t coils = ext.coils;
  if (klines == 0 || samples == 0 || coils == 0) throw ReconError("recon: zero-size grid");

  std::map<std::pair<std::uint16_t, std::uint16_t>, CellGrid> grids;  // (slice, phase)
  std::size_t duplicates = 0;
  for (const auto& r : bucket.readouts) {
    const auto& h = r.header;
    if (h.num_samples != samples || h.num_coils != coils) {
      throw ReconError("recon: readouts in one bucket differ in samples/coils");
    }
    auto& grid = grids[{h.slice_idx, h.phase_idx}];
    if (!grid.first) {
      grid.first = &h;
      grid.data.assign(coils * klines * samples, {});
      grid.filled.assign(klines, false);
    }
    if (grid.filled[h.kline_idx]) ++duplicates;
    grid.filled[h.kline_idx] = true;
    for (std::size_t c = 0; c < coils; ++c) {
      auto* dst = &grid.data[(c * klines + h.kline_idx) * samples];
      const auto* src = &r.samples[c * samples];
      std::copy(src, src + samples, dst);
    }
  }
  if (duplicates > 0) {
    spdlog::warn("recon: {} duplicate k-space cells (last write wins)", duplicates);
  }
  if (stats) stats->duplicate_cells = duplicates;

  std::string missing;
  std::size_t missing_count = 0;
  for (const auto& [key, grid] : grids) {
    for (std::size_t k = 0; k < klines; ++k) {
      if (grid.filled[k]) continue;
      if (++missing_count <= 16) {
        missing += " (slice " + std::to_string(key.first) + ", phase " +
                   std::to_string(key.second) + ", kline " + std::to_string(k) + ")";
      }
    }
  }
  if (missing_count > 0) {
    throw ReconError("recon: k-space not fully sampled, " + std::to_string(missing_count) +
                     " missing cells:" + missing + (missing_count > 16 ? " ..." : ""));
  }

  const float spacing_row =
      static_cast<float>(geometry.fov_phase_mm > 0.0 ? geometry.fov_phase_mm / klines : 1.0);
  const float spacing_col =
      static_cast<float>(geometry.fov_read_mm > 0.0 ? geometry.fov_read_mm / samples : 1.0);
  const double interval = geometry.phase_interval_ms > 0.0 ? geometry.phase_interval_ms : 1.0;

  std::vector<wire::ImageFrame> frames;
  frames.reserve(grids.size());
  std::vector<std::complex<float>> coil_image(klines * samples);
  for (auto& [key, grid] : grids) {
    std::vector<float> magnitude(klines * samples, 0.0f);
    std::vector<double> power(klines * samples, 0.0);
    for (std::size_t c = 0; c < coils; ++c) {
      std::copy_n(grid.data.begin() + static_cast<std::ptrdiff_t>(c * klines * samples),
                  klines * samples, coil_image.begin());
      centered_ifft2(coil_image, klines, samples);
      for (std::size_t i = 0; i < coil_image.size(); ++i) power[i] += std::norm(coil_image[i]);
    }
    for (std::size_t i = 0; i < power.size(); ++i) magnitude[i] = static_cast<float>(std::sqrt(power[i]));

    const auto& h = *grid.first;
    wire::ImageFrame frame;
    frame.header.slice_idx = key.first;
    frame.header.phase_idx = key.second;
    frame.header.rows = static_cast<std::uint16_t>(klines);
    frame.header.cols = static_cast<std::uint16_t>(samples);
    frame.header.data_type = wire::PixelType::kFloat;
    frame.header.pixel_spacing_mm = {spacing_row, spacing_col};
    frame.header.slice_thickness_mm = static_cast<float>(geometry.slice_thickness_mm);
    frame.header.slice_spacing_mm = static_cast<float>(geometry.slice_spacing_mm);
    frame.header.trigger_time_ms = static_cast<float>(key.second * interval);
    frame.header.row_dir = h.phase_dir;
    frame.header.col_dir = h.read_dir;
    // Readout position is the slice centre, which lands on pixel (N/2, N/2).
    const double hr = static_cast<double>(klines / 2) * spacing_row;
    const double hc = static_cast<double>(samples / 2) * spacing_col;
    for (int d = 0; d < 3; ++d) {
      frame.header.position_mm[d] =
          static_cast<float>(h.position_mm[d] - hr * h.phase_dir[d] - hc * h.read_dir[d]);
    }
    frame.meta.add("recon", "fft_rss");
    frame.meta.add("coils", std::to_string(coils));
    frame.pixels = std::move(magnitude);
    frames.push_back(std::move(frame));
  }
  return frames;
}

cmr::SegmentationMask label_from_probability(std::span<const wire::ImageFrame> planes,
                                             double threshold) {
  if (planes.empty()) throw ReconError("label_from_probability: no planes");
  const auto& first = planes.front().header;
  for (const auto& p : planes) {
    if (p.header.rows != first.rows || p.header.cols != first.cols) {
      throw ReconError("label_from_probability: planes have mismatched grids");
    }
    if (p.header.data_type != wire::PixelType::kFloat) {
      throw ReconError("label_from_probability: planes must be float images");
    }
  }
  cmr::SegmentationMask mask;
  mask.header = first;
  mask.header.data_type = wire::PixelType::kLabel;
  const std::size_t n = first.pixel_count();
  mask.labels.assign(n, cmr::label::kBackground);
  for (std::size_t i = 0; i < n; ++i) {
    float best = -std::numeric_limits<float>::infinity();
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < planes.size(); ++k) {
      float v = planes[k].magnitude()[i];
      if (v > best) {
        best = v;
        best_k = k;
      }
    }
    mask.labels[i] = best < threshold ? cmr::label::kBackground : static_cast<std::uint16_t>(best_k);
  }
  return mask;
}

namespace {

class FftReconGadget : public chain::Gadget {
 public:
  void configure(const chain::GadgetContext& ctx) override {
    geometry_ = GeometryDefaults::from_session_header(ctx.connection->session_header);
    series_ = static_cast<std::uint16_t>(chain::property_int(ctx.properties, "series_idx", 0));
  }

  void process(chain::Item item, chain::Emitter& out) override {
    auto* bucket = std::get_if<stages::KSpaceBucket>(&item);
    if (!bucket) {
      out.emit(std::move(item));
      return;
    }
    for (auto& frame : recon_bucket(*bucket, geometry_)) {
      frame.header.series_idx = series_;
      out.emit(std::move(frame));
    }
  }

 private:
  GeometryDefaults geometry_;
  std::uint16_t series_ = 0;
};

}  // namespace

void register_recon_gadgets(chain::GadgetRegistry& registry) {
  registry.add("fft_recon", [] { return std::make_unique<FftReconGadget>(); });
}

}  // namespace icmr::recon
