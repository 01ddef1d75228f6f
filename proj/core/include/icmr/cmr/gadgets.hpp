#pragma once

#include <string>

#include "icmr/cmr/perfusion.hpp"

namespace icmr::chain {
class GadgetRegistry;
}

namespace icmr::cmr {

// Session store artifact kinds.
inline constexpr const char* kLaxArtifact = "lax_landmarks";
inline constexpr const char* kPerfRestArtifact = "perf_rest_sectors";

std::string serialize_sector_values(const SectorValues& values);
SectorValues parse_sector_values(const std::string& text);

// sax_analysis, lax_analysis, perf_analysis.
void register_analysis_gadgets(chain::GadgetRegistry& registry);

}  // namespace icmr::cmr
