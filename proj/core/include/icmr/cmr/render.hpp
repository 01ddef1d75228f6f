#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icmr/cmr/perfusion.hpp"
#include "icmr/cmr/report.hpp"
#include "icmr/cmr/types.hpp"

namespace icmr::cmr {

using Rgb = std::array<std::uint8_t, 3>;

// 8-bit RGB raster, row-major.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  Raster() = default;
  Raster(std::size_t w, std::size_t h, Rgb fill = {0, 0, 0});
  bool empty() const { return width == 0 || height == 0; }
  Rgb at(std::size_t x, std::size_t y) const;
  void set(long x, long y, Rgb color);  // ignores out-of-bounds
};

// Mask pixels (label != 0) with a 4-neighbour of a different label.
std::vector<bool> boundary_pixels(const SegmentationMask& mask);

struct Segment {
  Point2 a, b;  // pixel coordinates (row, col)
};

// Where each SAX slice plane crosses the LAX image, clipped to the LAX
// pixel grid. Slices parallel to the LAX plane are skipped.
std::vector<Segment> cross_reference_lines(const wire::ImageHeader& lax,
                                           const std::vector<wire::ImageHeader>& sax);

struct MosaicTile {
  std::size_t rows = 0, cols = 0;
  std::vector<float> pixels;
  std::optional<SegmentationMask> mask;
  std::vector<std::string> labels;  // one text line each, top left
  std::vector<Segment> lines;
};

// ceil(sqrt(N)) columns; each tile is its frame scaled to 0..255 grey,
// mask boundaries in label colour, labels in the 5x7 font.
Raster render_mosaic(const std::vector<MosaicTile>& tiles);

void draw_text(Raster& raster, long x, long y, const std::string& text, Rgb color, int scale = 1);
void draw_line(Raster& raster, double x0, double y0, double x1, double y1, Rgb color);

// AHA bullseye: basal ring outside, apical inside, each wedge value labelled.
Raster render_bullseye(const SectorValues& values, const std::string& title, std::size_t size = 420);

Raster render_curve(const Curve& curve, const std::string& title, std::size_t width = 480,
                    std::size_t height = 320);

// Throws std::runtime_error on I/O failure.
void write_png(const std::string& path, const Raster& raster);

}  // namespace icmr::cmr
