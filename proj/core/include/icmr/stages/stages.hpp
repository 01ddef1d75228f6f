#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "icmr/stages/types.hpp"

namespace icmr::chain {
class GadgetRegistry;
}

namespace icmr::stages {

// Raised when the acquisition order breaks the monotone-key contract.
class StreamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TriggerDimension { kSlice, kPhase, kRepetition, kNone };

TriggerDimension parse_trigger_dimension(const std::string& text);
const char* trigger_dimension_name(TriggerDimension dim);
std::uint32_t trigger_key(const wire::ReadoutHeader& header, TriggerDimension dim);

// Buffers readouts and releases a bucket whenever the trigger dimension
// advances. Keys must be non-decreasing; with kNone everything is held until
// end of stream.
class KSpaceTrigger {
 public:
  explicit KSpaceTrigger(TriggerDimension dim) : dim_(dim) {}

  std::optional<KSpaceBucket> ingest(wire::KSpaceReadout readout);
  std::optional<KSpaceBucket> end_of_stream();

  TriggerDimension dimension() const { return dim_; }
  std::size_t buffered() const { return open_ ? open_->readouts.size() : 0; }
  std::size_t emitted() const { return emitted_; }

 private:
  TriggerDimension dim_;
  std::optional<KSpaceBucket> open_;
  std::size_t emitted_ = 0;
};

struct SplitBucket {
  KSpaceBucket imaging;
  KSpaceBucket calibration;
};

// Separates CALIBRATION-flagged readouts from imaging readouts, keeping the
// arrival order within each part.
SplitBucket prepare_ref(KSpaceBucket bucket);

enum class GroupBy { kSlice, kSeries, kAll };

GroupBy parse_group_by(const std::string& text);
const char* group_by_name(GroupBy group_by);

// Collects image frames into groups keyed by slice or series.
class ImageGrouper {
 public:
  explicit ImageGrouper(GroupBy group_by, std::size_t expected_frames = 0)
      : group_by_(group_by), expected_(expected_frames) {}

  std::optional<ImageGroup> ingest(wire::ImageFrame frame);
  std::optional<ImageGroup> end_of_stream();

  std::size_t buffered() const { return open_ ? open_->frames.size() : 0; }

 private:
  ImageGroup close_open();

  GroupBy group_by_;
  std::size_t expected_;
  std::optional<ImageGroup> open_;
};

// Registers kspace_buffer, trigger, prepare_ref and image_buffer.
void register_stream_gadgets(chain::GadgetRegistry& registry);

}  // namespace icmr::stages
