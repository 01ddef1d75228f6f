#include "icmr/cmr/types.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace icmr::cmr {

std::size_t SegmentationMask::count(std::uint16_t code) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), code));
}

const char* view_name(View view) { return view == View::kCh2 ? "CH2" : "CH4"; }

std::optional<View> parse_view(const std::string& text) {
  if (text == "CH2" || text == "ch2") return View::kCh2;
  if (text == "CH4" || text == "ch4") return View::kCh4;
  return std::nullopt;
}

std::string encode_labels_rle(std::span<const std::uint16_t> labels) {
  std::string out;
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    if (!out.empty()) out.push_back(',');
    out += std::to_string(labels[i]) + ":" + std::to_string(j - i);
    i = j;
  }
  return out;
}

namespace {

template <typename T>
T parse_number(std::string_view text, const char* what) {
  T value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw std::invalid_argument(std::string("bad ") + what + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::vector<std::uint16_t> decode_labels_rle(std::string_view text, std::size_t expected) {
  std::vector<std::uint16_t> out;
  out.reserve(expected);
  while (!text.empty()) {
    auto comma = text.find(',');
    auto run = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    auto colon = run.find(':');
    if (colon == std::string_view::npos) throw std::invalid_argument("label run without ':'");
    auto code = parse_number<std::uint16_t>(run.substr(0, colon), "label code");
    auto count = parse_number<std::size_t>(run.substr(colon + 1), "run length");
    if (out.size() + count > expected) throw std::invalid_argument("label runs exceed image size");
    out.insert(out.end(), count, code);
  }
  if (out.size() != expected) {
    throw std::invalid_argument("label runs cover " + std::to_string(out.size()) + " of " +
                                std::to_string(expected) + " pixels");
  }
  return out;
}

std::string format_landmark_entry(const std::string& name, const Point2& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, " %.17g %.17g", p.row, p.col);
  return name + buf;
}

std::pair<std::string, Point2> parse_landmark_entry(std::string_view text) {
  auto a = text.find(' ');
  auto b = a == std::string_view::npos ? a : text.find(' ', a + 1);
  if (b == std::string_view::npos) throw std::invalid_argument("landmark entry needs 'name row col'");
  Point2 p{parse_number<double>(text.substr(a + 1, b - a - 1), "landmark row"),
           parse_number<double>(text.substr(b + 1), "landmark col")};
  return {std::string(text.substr(0, a)), p};
}

}  // namespace icmr::cmr
