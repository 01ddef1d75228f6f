#pragma once

#include "icmr/chain/gadget.hpp"

namespace icmr {

// Every gadget compiled into the server.
chain::GadgetRegistry make_default_registry();

}  // namespace icmr
