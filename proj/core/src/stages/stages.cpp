#include "icmr/stages/stages.hpp"

#include <algorithm>

namespace icmr::stages {

KSpaceBucket::Extents KSpaceBucket::extents() const {
  Extents e;
  for (const auto& r : readouts) {
    e.klines = std::max<std::size_t>(e.klines, r.header.kline_idx + 1u);
    e.phases = std::max<std::size_t>(e.phases, r.header.phase_idx + 1u);
    e.coils = std::max<std::size_t>(e.coils, r.header.num_coils);
    e.samples = std::max<std::size_t>(e.samples, r.header.num_samples);
  }
  return e;
}

TriggerDimension parse_trigger_dimension(const std::string& text) {
  if (text == "slice") return TriggerDimension::kSlice;
  if (text == "phase") return TriggerDimension::kPhase;
  if (text == "repetition") return TriggerDimension::kRepetition;
  if (text == "none" || text.empty()) return TriggerDimension::kNone;
  throw std::invalid_argument("unknown trigger_dimension '" + text + "'");
}

const char* trigger_dimension_name(TriggerDimension dim) {
  switch (dim) {
    case TriggerDimension::kSlice: return "slice";
    case TriggerDimension::kPhase: return "phase";
    case TriggerDimension::kRepetition: return "repetition";
    case TriggerDimension::kNone: return "none";
  }
  return "none";
}

std::uint32_t trigger_key(const wire::ReadoutHeader& header, TriggerDimension dim) {
  switch (dim) {
    case TriggerDimension::kSlice: return header.slice_idx;
    case TriggerDimension::kPhase: return header.phase_idx;
    case TriggerDimension::kRepetition: return header.repetition_idx;
    case TriggerDimension::kNone: return 0;
  }
  return 0;
}

std::optional<KSpaceBucket> KSpaceTrigger::ingest(wire::KSpaceReadout readout) {
  std::uint32_t key = trigger_key(readout.header, dim_);
  std::optional<KSpaceBucket> ready;
  if (open_ && key != open_->key) {
    if (key < open_->key) {
      throw StreamError(std::string("trigger: ") + trigger_dimension_name(dim_) + " went from " +
                        std::to_string(open_->key) + " back to " + std::to_string(key));
    }
    ready = std::move(open_);
    open_.reset();
    ++emitted_;
  }
  if (!open_) open_ = KSpaceBucket{key, {}};
  open_->readouts.push_back(std::move(readout));
  return ready;
}

std::optional<KSpaceBucket> KSpaceTrigger::end_of_stream() {
  if (!open_) return std::nullopt;
  std::optional<KSpaceBucket> ready = std::move(open_);
  open_.reset();
  ++emitted_;
  return ready;
}

SplitBucket prepare_ref(KSpaceBucket bucket) {
  SplitBucket split;
  split.imaging.key = bucket.key;
  split.calibration.key = bucket.key;
  for (auto& r : bucket.readouts) {
    if (r.header.has_flag(wire::readout_flags::kCalibration)) {
      split.calibration.readouts.push_back(std::move(r));
    } else {
      split.imaging.readouts.push_back(std::move(r));
    }
  }
  return split;
}

GroupBy parse_group_by(const std::string& text) {
  if (text == "slice" || text.empty()) return GroupBy::kSlice;
  if (text == "series") return GroupBy::kSeries;
  if (text == "all") return GroupBy::kAll;
  throw std::invalid_argument("unknown group_by '" + text + "'");
}

const char* group_by_name(GroupBy group_by) {
  switch (group_by) {
    case GroupBy::kSlice: return "slice";
    case GroupBy::kSeries: return "series";
    case GroupBy::kAll: return "all";
  }
  return "slice";
}

namespace {

std::uint32_t group_key(const wire::ImageHeader& h, GroupBy group_by) {
  switch (group_by) {
    case GroupBy::kSlice: return h.slice_idx;
    case GroupBy::kSeries: return h.series_idx;
    case GroupBy::kAll: return 0;
  }
  return 0;
}

}  // namespace

ImageGroup ImageGrouper::close_open() {
  ImageGroup group = std::move(*open_);
  open_.reset();
  group.complete = expected_ == 0 || group.frames.size() == expected_;
  return group;
}

std::optional<ImageGroup> ImageGrouper::ingest(wire::ImageFrame frame) {
  std::uint32_t key = group_key(frame.header, group_by_);
  std::optional<ImageGroup> ready;
  if (open_ && key != open_->key) {
    if (key < open_->key) {
      throw StreamError(std::string("image_buffer: ") + group_by_name(group_by_) + " went from " +
                        std::to_string(open_->key) + " back to " + std::to_string(key));
    }
    ready = close_open();
  }
  if (!open_) open_ = ImageGroup{key, {}, false};
  open_->frames.push_back(std::move(frame));
  return ready;
}

std::optional<ImageGroup> ImageGrouper::end_of_stream() {
  if (!open_) return std::nullopt;
  return close_open();
}

}  // namespace icmr::stages
