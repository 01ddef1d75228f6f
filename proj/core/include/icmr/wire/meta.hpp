#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace icmr::wire {

// Ordered key=value attribute list. Keys may repeat to encode lists.
//
// Serialized form is one "key=value\n" line per entry, UTF-8. Keys must be
// non-empty and contain neither '=' nor '\n'; values must not contain '\n'.
class MetaAttributes {
 public:
  using Entry = std::pair<std::string, std::string>;

  MetaAttributes() = default;
  MetaAttributes(std::initializer_list<Entry> entries) : entries_(entries) {}

  void add(std::string key, std::string value);
  void add(std::string key, double value);
  // Replaces every entry for key with a single one.
  void set(std::string_view key, std::string value);
  void set(std::string_view key, double value);
  void erase(std::string_view key);

  std::optional<std::string> get(std::string_view key) const;
  std::vector<std::string> get_all(std::string_view key) const;
  std::optional<double> get_double(std::string_view key) const;
  bool contains(std::string_view key) const { return get(key).has_value(); }

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  // Throws std::invalid_argument naming the offending entry.
  void validate() const;
  std::string serialize() const;
  // Throws std::invalid_argument with the 1-based line number.
  static MetaAttributes parse(std::string_view text);

  bool operator==(const MetaAttributes&) const = default;

 private:
  std::vector<Entry> entries_;
};

}  // namespace icmr::wire
