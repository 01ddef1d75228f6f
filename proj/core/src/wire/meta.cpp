#include "icmr/wire/meta.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace icmr::wire {

namespace {

std::string format_double(double v) {
  // Shortest representation that round-trips.
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::invalid_argument("unformattable value");
  return std::string(buf, end);
}

}  // namespace

void MetaAttributes::add(std::string key, std::string value) {
  entries_.emplace_back(std::move(key), std::move(value));
}

void MetaAttributes::add(std::string key, double value) {
  add(std::move(key), format_double(value));
}

void MetaAttributes::set(std::string_view key, std::string value) {
  erase(key);
  entries_.emplace_back(std::string(key), std::move(value));
}

void MetaAttributes::set(std::string_view key, double value) {
  set(key, format_double(value));
}

void MetaAttributes::erase(std::string_view key) {
  std::erase_if(entries_, [&](const Entry& e) { return e.first == key; });
}

std::optional<std::string> MetaAttributes::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::vector<std::string> MetaAttributes::get_all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (k == key) out.push_back(v);
  }
  return out;
}

std::optional<double> MetaAttributes::get_double(std::string_view key) const {
  auto text = get(key);
  if (!text) return std::nullopt;
  double v = 0.0;
  const char* first = text->data();
  const char* last = first + text->size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("meta key '" + std::string(key) +
                                "' is not a number: " + *text);
  }
  return v;
}

void MetaAttributes::validate() const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [k, v] = entries_[i];
    if (k.empty()) {
      throw std::invalid_argument("meta entry " + std::to_string(i) + " has an empty key");
    }
    if (k.find_first_of("=\n") != std::string::npos) {
      throw std::invalid_argument("meta key '" + k + "' contains '=' or newline");
    }
    if (v.find('\n') != std::string::npos) {
      throw std::invalid_argument("meta value for '" + k + "' contains a newline");
    }
  }
}

std::string MetaAttributes::serialize() const {
  validate();
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

MetaAttributes MetaAttributes::parse(std::string_view text) {
  MetaAttributes meta;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    if (nl == std::string_view::npos) {
      throw std::invalid_argument("meta line " + std::to_string(line_no) +
                                  " is not newline-terminated");
    }
    auto line = text.substr(0, nl);
    text.remove_prefix(nl + 1);
    auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw std::invalid_argument("meta line " + std::to_string(line_no) +
                                  " is not key=value");
    }
    meta.add(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  return meta;
}

}  // namespace icmr::wire
