#include <spdlog/spdlog.h>

#include "icmr/chain/gadget.hpp"
#include "icmr/stages/stages.hpp"

namespace icmr::stages {

namespace {

using chain::Emitter;
using chain::GadgetContext;
using chain::Item;

// Checks that every readout of the scan has the same sample and coil
// counts, then forwards it.
class KSpaceBufferGadget : public chain::Gadget {
 public:
  void process(Item item, Emitter& out) override {
    if (auto* r = std::get_if<wire::KSpaceReadout>(&item)) {
      if (!shape_) {
        shape_ = {r->header.num_samples, r->header.num_coils};
      } else if (shape_->first != r->header.num_samples || shape_->second != r->header.num_coils) {
        throw StreamError("kspace_buffer: readout shape changed mid-scan (scan_counter " +
                          std::to_string(r->header.scan_counter) + ")");
      }
    }
    out.emit(std::move(item));
  }

 private:
  std::optional<std::pair<std::uint16_t, std::uint16_t>> shape_;
};

class TriggerGadget : public chain::Gadget {
 public:
  void configure(const GadgetContext& ctx) override {
    trigger_.emplace(parse_trigger_dimension(
        chain::property_or(ctx.properties, "trigger_dimension", "none")));
  }

  void process(Item item, Emitter& out) override {
    auto* r = std::get_if<wire::KSpaceReadout>(&item);
    if (!r) {
      out.emit(std::move(item));
      return;
    }
    if (auto bucket = trigger_->ingest(std::move(*r))) out.emit(std::move(*bucket));
  }

  void flush(Emitter& out) override {
    if (auto bucket = trigger_->end_of_stream()) out.emit(std::move(*bucket));
  }

 private:
  std::optional<KSpaceTrigger> trigger_;
};

class PrepareRefGadget : public chain::Gadget {
 public:
  void process(Item item, Emitter& out) override {
    auto* bucket = std::get_if<KSpaceBucket>(&item);
    if (!bucket) {
      out.emit(std::move(item));
      return;
    }
    auto split = prepare_ref(std::move(*bucket));
    calibration_lines_ += split.calibration.readouts.size();
    if (!split.imaging.empty()) out.emit(std::move(split.imaging));
  }

  void flush(Emitter&) override {
    if (calibration_lines_ > 0) {
      spdlog::debug("prepare_ref: set aside {} calibration readouts", calibration_lines_);
    }
  }

 private:
  std::size_t calibration_lines_ = 0;
};

class ImageBufferGadget : public chain::Gadget {
 public:
  void configure(const GadgetContext& ctx) override {
    grouper_.emplace(parse_group_by(chain::property_or(ctx.properties, "group_by", "slice")),
                     static_cast<std::size_t>(chain::property_int(ctx.properties, "expected_frames", 0)));
    passthrough_ = chain::property_bool(ctx.properties, "passthrough", true);
  }

  void process(Item item, Emitter& out) override {
    auto* frame = std::get_if<wire::ImageFrame>(&item);
    if (!frame) {
      out.emit(std::move(item));
      return;
    }
    if (passthrough_) out.emit(*frame);
    if (auto group = grouper_->ingest(std::move(*frame))) out.emit(std::move(*group));
  }

  void flush(Emitter& out) override {
    if (auto group = grouper_->end_of_stream()) out.emit(std::move(*group));
  }

 private:
  std::optional<ImageGrouper> grouper_;
  bool passthrough_ = true;
};

}  // namespace

void register_stream_gadgets(chain::GadgetRegistry& registry) {
  registry.add("kspace_buffer", [] { return std::make_unique<KSpaceBufferGadget>(); });
  registry.add("trigger", [] { return std::make_unique<TriggerGadget>(); });
  registry.add("prepare_ref", [] { return std::make_unique<PrepareRefGadget>(); });
  registry.add("image_buffer", [] { return std::make_unique<ImageBufferGadget>(); });
}

}  // namespace icmr::stages
