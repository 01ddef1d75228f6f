#pragma once

#include <cstdint>
#include <vector>

#include "icmr/wire/messages.hpp"

namespace icmr::stages {

struct KSpaceBucket {
  std::uint32_t key = 0;  // value of the trigger dimension, 0 for none
  std::vector<wire::KSpaceReadout> readouts;

  struct Extents {
    std::size_t klines = 0;
    std::size_t phases = 0;
    std::size_t coils = 0;
    std::size_t samples = 0;
  };
  Extents extents() const;
  bool empty() const { return readouts.empty(); }
};

struct ImageGroup {
  std::uint32_t key = 0;
  std::vector<wire::ImageFrame> frames;
  bool complete = false;
};

}  // namespace icmr::stages
