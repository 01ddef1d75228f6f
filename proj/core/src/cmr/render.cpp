#include "icmr/cmr/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "icmr/cmr/geometry.hpp"

namespace icmr::cmr {

namespace {

struct Glyph {
  char ch;
  std::array<std::uint8_t, 7> rows;
};

// 5x7, bit 4 is the leftmost column.
constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
};

const Glyph* glyph(char ch) {
  if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
  for (const auto& g : kFont) {
    if (g.ch == ch) return &g;
  }
  return nullptr;
}

Rgb label_color(std::uint16_t code) {
  switch (code) {
    case label::kLvBlood:
      return {255, 64, 64};
    case label::kLvMyocardium:
      return {64, 255, 64};
    case label::kRvBlood:
      return {64, 160, 255};
    default:
      return {255, 255, 0};
  }
}

// Blue to red through green/yellow for t in [0, 1].
Rgb heat(double t) {
  t = std::clamp(t, 0.0, 1.0);
  double r = std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0);
  double g = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
  double b = std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0);
  return {static_cast<std::uint8_t>(r * 255), static_cast<std::uint8_t>(g * 255),
          static_cast<std::uint8_t>(b * 255)};
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

Raster::Raster(std::size_t w, std::size_t h, Rgb fill) : width(w), height(h), rgb(w * h * 3) {
  for (std::size_t i = 0; i < w * h; ++i) std::copy(fill.begin(), fill.end(), rgb.begin() + static_cast<std::ptrdiff_t>(i * 3));
}

Rgb Raster::at(std::size_t x, std::size_t y) const {
  const auto* p = &rgb[(y * width + x) * 3];
  return {p[0], p[1], p[2]};
}

void Raster::set(long x, long y, Rgb color) {
  if (x < 0 || y < 0 || x >= static_cast<long>(width) || y >= static_cast<long>(height)) return;
  auto* p = &rgb[(static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)) * 3];
  p[0] = color[0];
  p[1] = color[1];
  p[2] = color[2];
}

std::vector<bool> boundary_pixels(const SegmentationMask& mask) {
  const std::size_t rows = mask.rows();
  const std::size_t cols = mask.cols();
  std::vector<bool> out(rows * cols, false);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      auto l = mask.at(r, c);
      if (l == 0) continue;
      bool edge = (r > 0 && mask.at(r - 1, c) != l) || (r + 1 < rows && mask.at(r + 1, c) != l) ||
                  (c > 0 && mask.at(r, c - 1) != l) || (c + 1 < cols && mask.at(r, c + 1) != l);
      out[r * cols + c] = edge;
    }
  }
  return out;
}

std::vector<Segment> cross_reference_lines(const wire::ImageHeader& lax,
                                           const std::vector<wire::ImageHeader>& sax) {
  std::vector<Segment> out;
  const Vec3 origin = to_patient_coords({0, 0}, lax);
  const Vec3 step_r = to_patient_coords({1, 0}, lax) - origin;
  const Vec3 step_c = to_patient_coords({0, 1}, lax) - origin;
  const double max_r = lax.rows - 1.0;
  const double max_c = lax.cols - 1.0;
  for (const auto& h : sax) {
    Vec3 n = plane_normal(h);
    Vec3 q = slice_center(h);
    // f(r, c) = a + b r + d c is the signed distance of LAX pixel (r, c).
    double a = dot(origin - q, n);
    double b = dot(step_r, n);
    double d = dot(step_c, n);
    if (std::abs(b) < 1e-9 && std::abs(d) < 1e-9) continue;
    std::vector<Point2> hits;
    auto add = [&](double r, double c) {
      if (r < -1e-9 || r > max_r + 1e-9 || c < -1e-9 || c > max_c + 1e-9) return;
      for (const auto& p : hits) {
        if (std::abs(p.row - r) < 1e-6 && std::abs(p.col - c) < 1e-6) return;
      }
      hits.push_back({r, c});
    };
    if (std::abs(d) > 1e-12) {
      add(0.0, -a / d);
      add(max_r, -(a + b * max_r) / d);
    }
    if (std::abs(b) > 1e-12) {
      add(-a / b, 0.0);
      add(-(a + d * max_c) / b, max_c);
    }
    if (hits.size() >= 2) out.push_back({hits[0], hits[1]});
  }
  return out;
}

void draw_text(Raster& raster, long x, long y, const std::string& text, Rgb color, int scale) {
  for (char ch : text) {
    if (const auto* g = glyph(ch)) {
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if (!(g->rows[static_cast<std::size_t>(row)] & (0x10 >> col))) continue;
          for (int sy = 0; sy < scale; ++sy) {
            for (int sx = 0; sx < scale; ++sx) {
              raster.set(x + (col * scale) + sx, y + (row * scale) + sy, color);
            }
          }
        }
      }
    }
    x += 6 * scale;
  }
}

void draw_line(Raster& raster, double x0, double y0, double x1, double y1, Rgb color) {
  double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  int steps = std::max(1, static_cast<int>(std::ceil(len)));
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    raster.set(std::lround(x0 + t * (x1 - x0)), std::lround(y0 + t * (y1 - y0)), color);
  }
}

Raster render_mosaic(const std::vector<MosaicTile>& tiles) {
  if (tiles.empty()) return {};
  const std::size_t rows = tiles.front().rows;
  const std::size_t cols = tiles.front().cols;
  const auto n = tiles.size();
  const auto grid_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t grid_rows = (n + grid_cols - 1) / grid_cols;
  Raster out(grid_cols * cols, grid_rows * rows);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = tiles[i];
    if (t.rows != rows || t.cols != cols) throw std::invalid_argument("mosaic tiles differ in size");
    const long x0 = static_cast<long>((i % grid_cols) * cols);
    const long y0 = static_cast<long>((i / grid_cols) * rows);
    float peak = 0.0f;
    for (float v : t.pixels) peak = std::max(peak, v);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        float v = t.pixels.empty() ? 0.0f : t.pixels[r * cols + c];
        auto g = static_cast<std::uint8_t>(peak > 0 ? std::clamp(v / peak, 0.0f, 1.0f) * 255.0f : 0.0f);
        out.set(x0 + static_cast<long>(c), y0 + static_cast<long>(r), {g, g, g});
      }
    }
    if (t.mask) {
      auto edge = boundary_pixels(*t.mask);
      for (std::size_t p = 0; p < edge.size(); ++p) {
        if (edge[p]) {
          out.set(x0 + static_cast<long>(p % cols), y0 + static_cast<long>(p / cols),
                  label_color(t.mask->labels[p]));
        }
      }
    }
    for (const auto& s : t.lines) {
      draw_line(out, x0 + s.a.col, y0 + s.a.row, x0 + s.b.col, y0 + s.b.row, {255, 255, 0});
    }
    long y = y0 + 2;
    for (const auto& line : t.labels) {
      draw_text(out, x0 + 2, y, line, {255, 255, 255});
      y += 9;
    }
  }
  return out;
}

Raster render_bullseye(const SectorValues& values, const std::string& title, std::size_t size) {
  Raster out(size, size + 20, {255, 255, 255});
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& v : values) {
    if (v) {
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
  }
  const double cx = size / 2.0, cy = 20 + size / 2.0;
  const double radius = size / 2.0 - 4;
  // Ring radii (fraction of radius): apical [0.15, 0.4), mid [0.4, 0.7), basal [0.7, 1].
  struct Ring {
    double inner, outer;
    int count, base;
  };
  const Ring rings[] = {{0.7, 1.0, 6, 0}, {0.4, 0.7, 6, 6}, {0.15, 0.4, 4, 12}};
  auto sector_of = [&](double dx, double dy) -> int {
    double r = std::hypot(dx, dy) / radius;
    double angle = std::atan2(-dy, dx) * 180.0 / std::numbers::pi;
    if (angle < 0) angle += 360.0;
    for (const auto& ring : rings) {
      if (r >= ring.inner && r <= ring.outer) {
        // Sector 1 of each ring starts at the 9 o'clock position going clockwise
        // on screen, so the wedges read like the usual AHA diagram.
        double rel = std::fmod(180.0 - angle + 360.0 + 360.0 / ring.count / 2.0, 360.0);
        int idx = std::min(ring.count - 1, static_cast<int>(rel / (360.0 / ring.count)));
        return ring.base + idx;
      }
    }
    return -1;
  };
  for (std::size_t y = 20; y < out.height; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      int k = sector_of(x - cx, y - cy);
      if (k < 0) continue;
      const auto& v = values[static_cast<std::size_t>(k)];
      Rgb c = v ? heat(hi > lo ? (*v - lo) / (hi - lo) : 0.5) : Rgb{200, 200, 200};
      out.set(static_cast<long>(x), static_cast<long>(y), c);
    }
  }
  // Wedge borders.
  for (std::size_t y = 21; y + 1 < out.height; ++y) {
    for (std::size_t x = 1; x + 1 < size; ++x) {
      int k = sector_of(x - cx, y - cy);
      if (k != sector_of(x + 1.0 - cx, y - cy) || k != sector_of(x - cx, y + 1.0 - cy)) {
        out.set(static_cast<long>(x), static_cast<long>(y), {0, 0, 0});
      }
    }
  }
  for (const auto& ring : rings) {
    for (int i = 0; i < ring.count; ++i) {
      double mid_angle = 180.0 - (i * 360.0 / ring.count);
      double rr = radius * (ring.inner + ring.outer) / 2.0;
      double x = cx + rr * std::cos(mid_angle * std::numbers::pi / 180.0);
      double y = cy - rr * std::sin(mid_angle * std::numbers::pi / 180.0);
      const auto& v = values[static_cast<std::size_t>(ring.base + i)];
      std::string text = v ? format_value(*v) : "-";
      Rgb fill = out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      const bool dark = 0.299 * fill[0] + 0.587 * fill[1] + 0.114 * fill[2] < 128.0;
      draw_text(out, std::lround(x - 3.0 * text.size()), std::lround(y - 3), text,
                dark ? Rgb{255, 255, 255} : Rgb{0, 0, 0});
    }
  }
  draw_text(out, 4, 4, title, {0, 0, 0}, 2);
  return out;
}

Raster render_curve(const Curve& curve, const std::string& title, std::size_t width, std::size_t height) {
  Raster out(width, height, {255, 255, 255});
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo, y_lo = x_lo, y_hi = -x_lo;
  for (const auto& [_, s] : curve.series) {
    for (double x : s.x) x_lo = std::min(x_lo, x), x_hi = std::max(x_hi, x);
    for (double y : s.y) y_lo = std::min(y_lo, y), y_hi = std::max(y_hi, y);
  }
  if (!(x_hi > x_lo)) x_hi = x_lo + 1;
  if (!(y_hi > y_lo)) y_hi = y_lo + 1;
  const double left = 50, right = width - 10.0, top = 30, bottom = height - 30.0;
  draw_line(out, left, top, left, bottom, {0, 0, 0});
  draw_line(out, left, bottom, right, bottom, {0, 0, 0});
  const Rgb palette[] = {{220, 40, 40}, {40, 90, 220}, {30, 150, 60}, {200, 120, 0}};
  std::size_t i = 0;
  for (const auto& [label, s] : curve.series) {
    Rgb color = palette[i % 4];
    auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (right - left); };
    auto py = [&](double y) { return bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top); };
    for (std::size_t k = 0; k + 1 < s.x.size() && k + 1 < s.y.size(); ++k) {
      draw_line(out, px(s.x[k]), py(s.y[k]), px(s.x[k + 1]), py(s.y[k + 1]), color);
    }
    draw_text(out, static_cast<long>(right) - 60, static_cast<long>(top + 10 * i), label, color);
    ++i;
  }
  draw_text(out, 4, 4, title, {0, 0, 0}, 2);
  draw_text(out, 2, static_cast<long>(top), format_value(y_hi), {0, 0, 0});
  draw_text(out, 2, static_cast<long>(bottom) - 7, format_value(y_lo), {0, 0, 0});
  draw_text(out, static_cast<long>(left), static_cast<long>(bottom) + 6,
            format_value(x_lo) + " " + curve.x_unit, {0, 0, 0});
  std::string hi_text = format_value(x_hi);
  draw_text(out, static_cast<long>(right - 6.0 * hi_text.size()), static_cast<long>(bottom) + 6, hi_text,
            {0, 0, 0});
  return out;
}

void write_png(const std::string& path, const Raster& raster) {
  if (raster.empty()) throw std::runtime_error("refusing to write an empty raster to " + path);
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw std::runtime_error("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < raster.height; ++y) {
    png_write_row(png, raster.rgb.data() + y * raster.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace icmr::cmr
