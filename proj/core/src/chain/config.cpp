#include "icmr/chain/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

namespace icmr::chain {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view s, std::size_t line) {
  std::vector<std::string> out;
  while (true) {
    auto comma = s.find(',');
    auto item = trim(s.substr(0, comma));
    if (item.empty()) throw ConfigError("empty entry in gadget list", line);
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

struct PendingSection {
  std::string target;  // gadget name or 1-based position
  std::size_t line = 0;
  PropertyMap properties;
};

}  // namespace

ChainConfig parse_chain_config(std::string_view text) {
  ChainConfig config;
  bool have_chain = false;
  bool have_gadgets = false;
  std::set<std::string> chain_keys;
  std::vector<PendingSection> sections;
  enum class Where { kNone, kChain, kGadget } where = Where::kNone;

  std::size_t line_no = 0;
  while (!text.empty() || line_no == 0) {
    ++line_no;
    auto nl = text.find('\n');
    auto raw = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') {
      if (text.empty()) break;
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      auto section = trim(line.substr(1, line.size() - 2));
      if (section == "chain") {
        if (have_chain) throw ConfigError("duplicate [chain] section", line_no);
        have_chain = true;
        where = Where::kChain;
      } else if (section.starts_with("gadget.")) {
        auto target = trim(section.substr(7));
        if (target.empty()) throw ConfigError("empty gadget section name", line_no);
        sections.push_back({std::string(target), line_no, {}});
        where = Where::kGadget;
      } else {
        throw ConfigError("unknown section [" + std::string(section) + "]", line_no);
      }
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", line_no);
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("empty key", line_no);

    switch (where) {
      case Where::kNone:
        throw ConfigError("key '" + key + "' outside of any section", line_no);
      case Where::kChain:
        if (!chain_keys.insert(key).second) throw ConfigError("duplicate key '" + key + "'", line_no);
        if (key == "name") {
          config.name = value;
        } else if (key == "reader") {
          config.reader_name = value;
        } else if (key == "writer") {
          config.writer_name = value;
        } else if (key == "gadgets") {
          have_gadgets = true;
          for (auto& g : split_list(value, line_no)) config.gadgets.push_back({g, {}});
        } else {
          throw ConfigError("unknown [chain] key '" + key + "'", line_no);
        }
        break;
      case Where::kGadget: {
        auto& props = sections.back().properties;
        if (!props.emplace(key, value).second) {
          throw ConfigError("duplicate key '" + key + "'", line_no);
        }
        break;
      }
    }
    if (text.empty()) break;
  }

  if (!have_chain) throw ConfigError("missing [chain] section");
  if (!have_gadgets) throw ConfigError("[chain] is missing the gadgets key");
  if (config.gadgets.empty()) throw ConfigError("gadget list is empty");

  for (const auto& section : sections) {
    bool matched = false;
    if (all_digits(section.target)) {
      std::size_t pos = 0;
      std::from_chars(section.target.data(), section.target.data() + section.target.size(), pos);
      if (pos == 0 || pos > config.gadgets.size()) {
        throw ConfigError("gadget position " + section.target + " out of range", section.line);
      }
      for (const auto& [k, v] : section.properties) config.gadgets[pos - 1].properties[k] = v;
      matched = true;
    } else {
      for (auto& g : config.gadgets) {
        if (g.name != section.target) continue;
        for (const auto& [k, v] : section.properties) g.properties[k] = v;
        matched = true;
      }
    }
    if (!matched) {
      throw ConfigError("section [gadget." + section.target + "] names no gadget in the chain",
                        section.line);
    }
  }
  return config;
}

std::string format_chain_config(const ChainConfig& config) {
  std::string out = "[chain]\n";
  if (!config.name.empty()) out += "name = " + config.name + "\n";
  out += "reader = " + config.reader_name + "\n";
  out += "writer = " + config.writer_name + "\n";
  out += "gadgets = ";
  for (std::size_t i = 0; i < config.gadgets.size(); ++i) {
    if (i) out += ", ";
    out += config.gadgets[i].name;
  }
  out += "\n";
  for (std::size_t i = 0; i < config.gadgets.size(); ++i) {
    const auto& g = config.gadgets[i];
    if (g.properties.empty()) continue;
    out += "\n[gadget." + std::to_string(i + 1) + "]\n";
    for (const auto& [k, v] : g.properties) out += k + " = " + v + "\n";
  }
  return out;
}

std::string property_or(const PropertyMap& props, const std::string& key,
                        const std::string& fallback) {
  auto it = props.find(key);
  return it == props.end() ? fallback : it->second;
}

double property_double(const PropertyMap& props, const std::string& key, double fallback) {
  auto it = props.find(key);
  if (it == props.end()) return fallback;
  double v = 0.0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("property '" + key + "' is not a number: " + s);
  }
  return v;
}

long property_int(const PropertyMap& props, const std::string& key, long fallback) {
  auto it = props.find(key);
  if (it == props.end()) return fallback;
  long v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("property '" + key + "' is not an integer: " + s);
  }
  return v;
}

bool property_bool(const PropertyMap& props, const std::string& key, bool fallback) {
  auto it = props.find(key);
  if (it == props.end()) return fallback;
  const auto& s = it->second;
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("property '" + key + "' is not a boolean: " + s);
}

}  // namespace icmr::chain
