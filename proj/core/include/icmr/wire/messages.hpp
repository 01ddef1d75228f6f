#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "icmr/wire/meta.hpp"

namespace icmr::wire {

using Vec3f = std::array<float, 3>;

enum class MessageId : std::uint16_t {
  kConfigName = 1,
  kConfigInline = 2,
  kSessionHeader = 3,
  kClose = 4,
  kText = 5,
  kAcquisition = 10,
  kImage = 11,
  kWaveform = 12,
  kReport = 13,
};

bool is_known_message_id(std::uint16_t id);
const char* message_name(MessageId id);

namespace readout_flags {
inline constexpr std::uint64_t kCalibration = 1ull << 0;
inline constexpr std::uint64_t kLastInSlice = 1ull << 1;
inline constexpr std::uint64_t kLastInScan = 1ull << 2;
}  // namespace readout_flags

struct ReadoutHeader {
  std::uint16_t version = 1;
  std::uint64_t flags = 0;
  std::uint32_t scan_counter = 0;
  std::uint16_t num_samples = 0;
  std::uint16_t num_coils = 0;
  std::uint16_t kline_idx = 0;
  std::uint16_t slice_idx = 0;
  std::uint16_t phase_idx = 0;
  std::uint16_t repetition_idx = 0;
  std::uint16_t set_idx = 0;
  std::uint16_t average_idx = 0;
  std::uint32_t sample_time_ns = 0;
  Vec3f position_mm{};
  Vec3f read_dir{1.0f, 0.0f, 0.0f};
  Vec3f phase_dir{0.0f, 1.0f, 0.0f};
  Vec3f slice_dir{0.0f, 0.0f, 1.0f};

  static constexpr std::size_t kWireSize = 82;

  bool has_flag(std::uint64_t f) const { return (flags & f) != 0; }
  bool operator==(const ReadoutHeader&) const = default;
};

// One acquired k-space line. Samples are coil-major:
// samples[coil * num_samples + i].
struct KSpaceReadout {
  ReadoutHeader header;
  std::vector<std::complex<float>> samples;

  bool operator==(const KSpaceReadout&) const = default;
};

enum class PixelType : std::uint16_t {
  kFloat = 1,
  kComplex = 2,
  kLabel = 3,
};

std::size_t pixel_width(PixelType type);

struct ImageHeader {
  std::uint16_t version = 1;
  std::uint64_t flags = 0;
  std::uint16_t series_idx = 0;
  std::uint16_t slice_idx = 0;
  std::uint16_t phase_idx = 0;
  std::uint16_t rows = 0;
  std::uint16_t cols = 0;
  PixelType data_type = PixelType::kFloat;
  std::array<float, 2> pixel_spacing_mm{1.0f, 1.0f};  // (row, col)
  float slice_thickness_mm = 1.0f;
  float slice_spacing_mm = 1.0f;
  float trigger_time_ms = 0.0f;
  Vec3f position_mm{};
  Vec3f row_dir{1.0f, 0.0f, 0.0f};
  Vec3f col_dir{0.0f, 1.0f, 0.0f};

  static constexpr std::size_t kWireSize = 78;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  bool operator==(const ImageHeader&) const = default;
};

using PixelData = std::variant<std::vector<float>, std::vector<std::complex<float>>,
                               std::vector<std::uint16_t>>;

struct ImageFrame {
  ImageHeader header;
  MetaAttributes meta;
  PixelData pixels;

  const std::vector<float>& magnitude() const { return std::get<std::vector<float>>(pixels); }
  std::vector<float>& magnitude() { return std::get<std::vector<float>>(pixels); }
  const std::vector<std::uint16_t>& labels() const {
    return std::get<std::vector<std::uint16_t>>(pixels);
  }

  bool operator==(const ImageFrame&) const = default;
};

enum class WaveformType : std::uint16_t { kEcg = 1, kRespiratory = 2 };

struct Waveform {
  WaveformType wf_type = WaveformType::kEcg;
  float sample_period_ms = 1.0f;
  std::vector<float> samples;

  bool operator==(const Waveform&) const = default;
};

struct ConfigName {
  std::string name;
  bool operator==(const ConfigName&) const = default;
};

struct ConfigInline {
  std::string document;
  bool operator==(const ConfigInline&) const = default;
};

// heart_rate_bpm, bsa_m2, patient_key, scan_kind and free-form extras.
struct SessionHeader {
  MetaAttributes fields;
  bool operator==(const SessionHeader&) const = default;
};

struct Close {
  bool operator==(const Close&) const = default;
};

struct Text {
  std::string line;
  bool operator==(const Text&) const = default;
};

// Structured report document (JSON text, see report.hpp).
struct Report {
  std::string document;
  bool operator==(const Report&) const = default;
};

using Message = std::variant<ConfigName, ConfigInline, SessionHeader, Close, Text,
                             KSpaceReadout, ImageFrame, Waveform, Report>;

MessageId message_id(const Message& message);

}  // namespace icmr::wire
