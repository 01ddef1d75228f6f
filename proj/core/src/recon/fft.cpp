#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <tuple>

#include "icmr/recon/recon.hpp"

namespace icmr::recon {

namespace {

// fftw planning is not thread-safe; execution with the new-array interface
// is. Plans are cached per (rows, cols, direction) for the process lifetime.
class PlanCache {
 public:
  fftwf_plan get(std::size_t rows, std::size_t cols, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(rows, cols, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    auto* scratch = fftwf_alloc_complex(rows * cols);
    fftwf_plan plan = fftwf_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), scratch,
                                        scratch, sign, FFTW_ESTIMATE);
    fftwf_free(scratch);
    if (!plan) throw ReconError("fftw could not plan a transform");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [_, plan] : plans_) fftwf_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftwf_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

struct AlignedBuffer {
  explicit AlignedBuffer(std::size_t n) : data(fftwf_alloc_complex(n)) {
    if (!data) throw std::bad_alloc();
  }
  ~AlignedBuffer() { fftwf_free(data); }
  AlignedBuffer(const AlignedBuffer&) = delete;
  AlignedBuffer& operator=(const AlignedBuffer&) = delete;
  fftwf_complex* data;
};

void centered_transform(std::span<std::complex<float>> data, std::size_t rows, std::size_t cols,
                        int sign) {
  if (rows == 0 || cols == 0) throw ReconError("empty transform grid");
  if (data.size() != rows * cols) throw ReconError("transform buffer size mismatch");
  const std::size_t hr = rows / 2;
  const std::size_t hc = cols / 2;
  AlignedBuffer buf(rows * cols);
  auto* work = reinterpret_cast<std::complex<float>*>(buf.data);

  // Move the centre (index N/2) to index 0 on input and back on output; the
  // exponent (u - h)(x - h) is congruent to u'x' modulo N under this shift.
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t rr = (r + rows - hr) % rows;
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t cc = (c + cols - hc) % cols;
      work[rr * cols + cc] = data[r * cols + c];
    }
  }
  fftwf_execute_dft(plan_cache().get(rows, cols, sign), buf.data, buf.data);
  const float scale = 1.0f / std::sqrt(static_cast<float>(rows * cols));
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t rr = (r + rows - hr) % rows;
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t cc = (c + cols - hc) % cols;
      data[r * cols + c] = work[rr * cols + cc] * scale;
    }
  }
}

}  // namespace

void centered_fft2(std::span<std::complex<float>> data, std::size_t rows, std::size_t cols) {
  centered_transform(data, rows, cols, FFTW_FORWARD);
}

void centered_ifft2(std::span<std::complex<float>> data, std::size_t rows, std::size_t cols) {
  centered_transform(data, rows, cols, FFTW_BACKWARD);
}

}  // namespace icmr::recon
