#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "icmr/cmr/types.hpp"
#include "icmr/stages/types.hpp"
#include "icmr/wire/meta.hpp"

namespace icmr::chain {
class GadgetRegistry;
}

namespace icmr::recon {

class ReconError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Centered, unitary 2D DFT on a row-major rows x cols array. The k-space
// and image origins both sit at index N/2 (integer division) along each
// axis, and both directions scale by 1/sqrt(rows*cols), so the transforms
// are exact inverses and preserve the L2 norm.
void centered_fft2(std::span<std::complex<float>> data, std::size_t rows, std::size_t cols);
void centered_ifft2(std::span<std::complex<float>> data, std::size_t rows, std::size_t cols);

// Geometry the readouts do not carry, taken from the session header.
struct GeometryDefaults {
  double fov_read_mm = 0.0;   // <= 0: 1 mm per sample
  double fov_phase_mm = 0.0;  // <= 0: 1 mm per line
  double slice_thickness_mm = 8.0;
  double slice_spacing_mm = 10.0;
  double phase_interval_ms = 0.0;  // <= 0: derived from heart rate, else 1 ms

  // Keys: fov_read_mm, fov_phase_mm, slice_thickness_mm, slice_spacing_mm,
  // phase_interval_ms, heart_rate_bpm + n_phases.
  static GeometryDefaults from_session_header(const wire::MetaAttributes& header);
};

struct ReconStats {
  std::size_t duplicate_cells = 0;
};

// Fully sampled Cartesian reconstruction: one magnitude frame per
// (slice, phase) present in the bucket, each the root-sum-of-squares over
// coils of the centered inverse DFT. Frames come out ordered by slice, then
// phase. Throws ReconError listing unfilled (phase, kline) cells.
std::vector<wire::ImageFrame> recon_bucket(const stages::KSpaceBucket& bucket,
                                           const GeometryDefaults& geometry,
                                           ReconStats* stats = nullptr);

// Per-pixel argmax over class planes (plane k scores label k). Pixels whose
// best score is below threshold become background.
cmr::SegmentationMask label_from_probability(std::span<const wire::ImageFrame> planes,
                                             double threshold = 0.5);

// Registers fft_recon.
void register_recon_gadgets(chain::GadgetRegistry& registry);

}  // namespace icmr::recon
