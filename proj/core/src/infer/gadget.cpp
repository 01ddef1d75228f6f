#include <spdlog/spdlog.h>

#include "icmr/chain/gadget.hpp"
#include "icmr/infer/conversion.hpp"
#include "icmr/infer/worker_client.hpp"

namespace icmr::infer {

namespace {

// ImageAnalysis model side. Launches one worker and loads the model while
// the chain is configured; every ImageGroup is sent through the model and
// leaves as an InferenceResult. Other items pass through.
class InferenceGadget : public chain::Gadget {
 public:
  void configure(const chain::GadgetContext& ctx) override {
    const auto& props = ctx.properties;
    spec_.model_id = chain::property_or(props, "model", "");
    if (spec_.model_id.empty()) throw chain::ConfigError("inference: property 'model' is required");
    spec_.device = parse_device(chain::property_or(props, "device", "cpu"));
    spec_.worker_cmd = chain::property_or(props, "worker_cmd", "");
    spec_.worker_endpoint = chain::property_or(props, "worker_endpoint", "");
    spec_.load_timeout =
        std::chrono::milliseconds(chain::property_int(props, "load_timeout_ms", 30'000));
    infer_timeout_ = std::chrono::milliseconds(chain::property_int(props, "infer_timeout_ms", 60'000));
    for (const auto& [key, value] : props) {
      if (key.starts_with("param.")) spec_.params[key.substr(6)] = value;
    }
    client_ = WorkerClient::launch(spec_);
    handle_ = client_->load(spec_);
    spdlog::info("inference: model '{}' loaded on {} (worker pid {})", spec_.model_id,
                 device_name(spec_.device), client_->pid());
  }

  void process(chain::Item item, chain::Emitter& out) override {
    auto* group = std::get_if<stages::ImageGroup>(&item);
    if (!group) {
      out.emit(std::move(item));
      return;
    }
    auto outputs = client_->infer(handle_, group_to_tensors(*group), infer_timeout_);
    auto artifacts = artifacts_from_tensors(outputs, *group);
    chain::InferenceResult result;
    result.model_id = spec_.model_id;
    result.masks = std::move(artifacts.masks);
    result.landmarks = std::move(artifacts.landmarks);
    result.group = std::move(*group);
    out.emit(std::move(result));
  }

  void flush(chain::Emitter&) override {
    if (client_) client_->shutdown();
  }

 private:
  ModelSpec spec_;
  std::chrono::milliseconds infer_timeout_{60'000};
  std::unique_ptr<WorkerClient> client_;
  ModelHandle handle_;
};

}  // namespace

void register_inference_gadgets(chain::GadgetRegistry& registry) {
  registry.add("inference", [] { return std::make_unique<InferenceGadget>(); });
}

}  // namespace icmr::infer
