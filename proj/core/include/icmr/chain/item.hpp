#pragma once

#include <string>
#include <variant>
#include <vector>

#include "icmr/cmr/types.hpp"
#include "icmr/stages/types.hpp"
#include "icmr/wire/messages.hpp"

namespace icmr::chain {

// Output of the inference stage: the analysed group plus whatever the model
// produced for it.
struct InferenceResult {
  std::string model_id;
  stages::ImageGroup group;
  std::vector<cmr::SegmentationMask> masks;
  std::vector<cmr::LandmarkSet> landmarks;
};

// Anything that can travel between stages. The wire kinds reach the writer
// and go back to the client; the rest are intermediate.
using Item = std::variant<wire::KSpaceReadout, wire::ImageFrame, wire::Waveform, wire::Text,
                          wire::Report, stages::KSpaceBucket, stages::ImageGroup,
                          InferenceResult>;

const char* item_kind(const Item& item);

}  // namespace icmr::chain
