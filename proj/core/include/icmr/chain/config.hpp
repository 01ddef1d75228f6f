#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace icmr::chain {

using PropertyMap = std::map<std::string, std::string>;

struct GadgetSpec {
  std::string name;
  PropertyMap properties;
};

struct ChainConfig {
  std::string name;
  std::string reader_name = "icsp";
  std::string writer_name = "icsp";
  std::vector<GadgetSpec> gadgets;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// INI-style chain document:
//
//   [chain]
//   name = sax_inline_ai          (optional)
//   reader = icsp
//   writer = icsp
//   gadgets = kspace_buffer, trigger, fft_recon
//
//   [gadget.trigger]              applies to every gadget named "trigger"
//   trigger_dimension = slice
//
//   [gadget.3]                    applies to the 3rd gadget only
//
// '#' and ';' start comment lines. Unknown sections and keys are errors.
ChainConfig parse_chain_config(std::string_view text);

std::string format_chain_config(const ChainConfig& config);

// Typed property lookups shared by gadgets. Parse failures throw
// ConfigError naming the property.
std::string property_or(const PropertyMap& props, const std::string& key,
                        const std::string& fallback);
double property_double(const PropertyMap& props, const std::string& key, double fallback);
long property_int(const PropertyMap& props, const std::string& key, long fallback);
bool property_bool(const PropertyMap& props, const std::string& key, bool fallback);

}  // namespace icmr::chain
