#pragma once

#include <stdexcept>
#include <vector>

#include "icmr/cmr/types.hpp"
#include "icmr/infer/tensor.hpp"
#include "icmr/stages/types.hpp"

namespace icmr::chain {
class GadgetRegistry;
}

namespace icmr::infer {

class ConversionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Image group -> model inputs:
//   "frames"        f32 [N, rows, cols]   magnitude pixels in group order
//   "trigger_times" f32 [N]
//   "meta"          u8  [N, L]            each frame's serialized meta,
//                                         zero padded to the longest
// All frames must share rows x cols and be float images.
std::vector<Tensor> group_to_tensors(const stages::ImageGroup& group);

struct ModelArtifacts {
  std::vector<cmr::SegmentationMask> masks;
  std::vector<cmr::LandmarkSet> landmarks;
};

// Model outputs -> artifacts. Recognized tensors:
//   "mask"           u8  [N, rows, cols]  label codes, one mask per frame
//   "landmarks"      f32 [N, K, 2]        (row, col); NaN marks a missing point
//   "landmark_names" u8  [len]            K comma-separated names
// Echoed inputs ("frames", "trigger_times", "meta") are ignored; any other
// name is an error. Geometry, indices and view come from the group frames.
ModelArtifacts artifacts_from_tensors(const std::vector<Tensor>& tensors,
                                      const stages::ImageGroup& group);

// Inverse of the mask branch above, used by workers and tests.
Tensor masks_to_tensor(const std::vector<cmr::SegmentationMask>& masks);

// Registers the inference gadget.
void register_inference_gadgets(chain::GadgetRegistry& registry);

}  // namespace icmr::infer
