#include "icmr/gadgets.hpp"

#include "icmr/cmr/gadgets.hpp"
#include "icmr/infer/conversion.hpp"
#include "icmr/recon/recon.hpp"
#include "icmr/stages/stages.hpp"

namespace icmr {

chain::GadgetRegistry make_default_registry() {
  chain::GadgetRegistry registry;
  stages::register_stream_gadgets(registry);
  recon::register_recon_gadgets(registry);
  infer::register_inference_gadgets(registry);
  cmr::register_analysis_gadgets(registry);
  return registry;
}

}  // namespace icmr
