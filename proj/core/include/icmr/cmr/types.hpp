#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icmr/wire/messages.hpp"

namespace icmr::cmr {

namespace label {
inline constexpr std::uint16_t kBackground = 0;
inline constexpr std::uint16_t kLvBlood = 1;
inline constexpr std::uint16_t kLvMyocardium = 2;
inline constexpr std::uint16_t kRvBlood = 3;
}  // namespace label

// Label image over the grid of `header` (rows x cols, row-major).
struct SegmentationMask {
  wire::ImageHeader header;
  std::vector<std::uint16_t> labels;

  std::size_t rows() const { return header.rows; }
  std::size_t cols() const { return header.cols; }
  std::uint16_t at(std::size_t r, std::size_t c) const { return labels[r * header.cols + c]; }
  std::size_t count(std::uint16_t code) const;

  bool operator==(const SegmentationMask&) const = default;
};

// Pixel coordinate, fractional allowed.
struct Point2 {
  double row = 0.0;
  double col = 0.0;
  bool operator==(const Point2&) const = default;
};

enum class View { kCh2, kCh4 };

const char* view_name(View view);
std::optional<View> parse_view(const std::string& text);

struct LandmarkSet {
  View view = View::kCh4;
  std::uint16_t phase_idx = 0;
  double trigger_time_ms = 0.0;
  std::map<std::string, Point2> points;

  bool operator==(const LandmarkSet&) const = default;
};

// Run-length text form of a label image, "code:count,code:count,...",
// used to carry ground-truth masks in frame meta (key "gt_mask").
std::string encode_labels_rle(std::span<const std::uint16_t> labels);
// Throws std::invalid_argument on malformed text or when the runs do not
// add up to `expected` pixels.
std::vector<std::uint16_t> decode_labels_rle(std::string_view text, std::size_t expected);

// Landmark meta entry "name row col" (key "gt_landmark", repeated).
std::string format_landmark_entry(const std::string& name, const Point2& p);
std::pair<std::string, Point2> parse_landmark_entry(std::string_view text);

}  // namespace icmr::cmr
