#include "icmr/wire/codec.hpp"

#include <cmath>
#include <limits>

namespace icmr::wire {

namespace {

constexpr float kUnitTolerance = 1e-3f;

bool unit_norm(const Vec3f& v) {
  double n = std::sqrt(double(v[0]) * v[0] + double(v[1]) * v[1] + double(v[2]) * v[2]);
  return std::isfinite(n) && std::abs(n - 1.0) <= kUnitTolerance;
}

template <typename Error>
void check_unit(const Vec3f& v, const char* field) {
  if (!unit_norm(v)) throw Error(std::string(field) + " is not unit-norm");
}

template <typename Error>
void check_readout(const KSpaceReadout& r) {
  const auto& h = r.header;
  if (h.num_samples == 0) throw Error("readout num_samples must be > 0");
  if (h.num_coils == 0) throw Error("readout num_coils must be > 0");
  check_unit<Error>(h.read_dir, "readout read_dir");
  check_unit<Error>(h.phase_dir, "readout phase_dir");
  check_unit<Error>(h.slice_dir, "readout slice_dir");
  std::size_t expected = std::size_t(h.num_samples) * h.num_coils;
  if (r.samples.size() != expected) {
    throw Error("readout samples has " + std::to_string(r.samples.size()) +
                " values, header implies " + std::to_string(expected));
  }
}

std::size_t pixel_vector_size(const PixelData& p) {
  return std::visit([](const auto& v) { return v.size(); }, p);
}

PixelType pixel_vector_type(const PixelData& p) {
  switch (p.index()) {
    case 0: return PixelType::kFloat;
    case 1: return PixelType::kComplex;
    default: return PixelType::kLabel;
  }
}

bool known_pixel_type(std::uint16_t t) { return t >= 1 && t <= 3; }

template <typename Error>
void check_image_header(const ImageHeader& h) {
  if (h.pixel_count() == 0) throw Error("image rows*cols must be > 0");
  if (!known_pixel_type(static_cast<std::uint16_t>(h.data_type))) {
    throw Error("image data_type " + std::to_string(static_cast<int>(h.data_type)) +
                " is unknown");
  }
  if (!(h.pixel_spacing_mm[0] > 0.0f) || !(h.pixel_spacing_mm[1] > 0.0f)) {
    throw Error("image pixel_spacing_mm must be > 0");
  }
  if (!(h.slice_thickness_mm > 0.0f)) throw Error("image slice_thickness_mm must be > 0");
  if (!(h.slice_spacing_mm >= h.slice_thickness_mm)) {
    throw Error("image slice_spacing_mm must be >= slice_thickness_mm");
  }
}

void encode_header(ByteWriter& w, const ReadoutHeader& h) {
  w.u16(h.version);
  w.u64(h.flags);
  w.u32(h.scan_counter);
  w.u16(h.num_samples);
  w.u16(h.num_coils);
  w.u16(h.kline_idx);
  w.u16(h.slice_idx);
  w.u16(h.phase_idx);
  w.u16(h.repetition_idx);
  w.u16(h.set_idx);
  w.u16(h.average_idx);
  w.u32(h.sample_time_ns);
  w.f32s(h.position_mm);
  w.f32s(h.read_dir);
  w.f32s(h.phase_dir);
  w.f32s(h.slice_dir);
}

ReadoutHeader decode_readout_header(ByteReader& r) {
  ReadoutHeader h;
  h.version = r.u16();
  h.flags = r.u64();
  h.scan_counter = r.u32();
  h.num_samples = r.u16();
  h.num_coils = r.u16();
  h.kline_idx = r.u16();
  h.slice_idx = r.u16();
  h.phase_idx = r.u16();
  h.repetition_idx = r.u16();
  h.set_idx = r.u16();
  h.average_idx = r.u16();
  h.sample_time_ns = r.u32();
  h.position_mm = r.f32s<3>();
  h.read_dir = r.f32s<3>();
  h.phase_dir = r.f32s<3>();
  h.slice_dir = r.f32s<3>();
  return h;
}

void encode_header(ByteWriter& w, const ImageHeader& h) {
  w.u16(h.version);
  w.u64(h.flags);
  w.u16(h.series_idx);
  w.u16(h.slice_idx);
  w.u16(h.phase_idx);
  w.u16(h.rows);
  w.u16(h.cols);
  w.u16(static_cast<std::uint16_t>(h.data_type));
  w.f32s(h.pixel_spacing_mm);
  w.f32(h.slice_thickness_mm);
  w.f32(h.slice_spacing_mm);
  w.f32(h.trigger_time_ms);
  w.f32s(h.position_mm);
  w.f32s(h.row_dir);
  w.f32s(h.col_dir);
}

ImageHeader decode_image_header(ByteReader& r) {
  ImageHeader h;
  h.version = r.u16();
  h.flags = r.u64();
  h.series_idx = r.u16();
  h.slice_idx = r.u16();
  h.phase_idx = r.u16();
  h.rows = r.u16();
  h.cols = r.u16();
  h.data_type = static_cast<PixelType>(r.u16());
  h.pixel_spacing_mm = r.f32s<2>();
  h.slice_thickness_mm = r.f32();
  h.slice_spacing_mm = r.f32();
  h.trigger_time_ms = r.f32();
  h.position_mm = r.f32s<3>();
  h.row_dir = r.f32s<3>();
  h.col_dir = r.f32s<3>();
  return h;
}

void encode_payload(ByteWriter& w, const ConfigName& m) { w.text(m.name); }
void encode_payload(ByteWriter& w, const ConfigInline& m) { w.text(m.document); }
void encode_payload(ByteWriter& w, const Text& m) { w.text(m.line); }
void encode_payload(ByteWriter& w, const Report& m) { w.text(m.document); }
void encode_payload(ByteWriter&, const Close&) {}

void encode_payload(ByteWriter& w, const SessionHeader& m) {
  std::string text;
  try {
    text = m.fields.serialize();
  } catch (const std::invalid_argument& e) {
    throw EncodeError(std::string("session header: ") + e.what());
  }
  w.text(text);
}

void encode_payload(ByteWriter& w, const KSpaceReadout& m) {
  check_readout<EncodeError>(m);
  encode_header(w, m.header);
  for (const auto& s : m.samples) {
    w.f32(s.real());
    w.f32(s.imag());
  }
}

void encode_payload(ByteWriter& w, const ImageFrame& m) {
  check_image_header<EncodeError>(m.header);
  if (pixel_vector_type(m.pixels) != m.header.data_type) {
    throw EncodeError("image pixels do not match header data_type");
  }
  if (pixel_vector_size(m.pixels) != m.header.pixel_count()) {
    throw EncodeError("image pixels has " + std::to_string(pixel_vector_size(m.pixels)) +
                      " values, header implies " + std::to_string(m.header.pixel_count()));
  }
  std::string meta;
  try {
    meta = m.meta.serialize();
  } catch (const std::invalid_argument& e) {
    throw EncodeError(std::string("image meta: ") + e.what());
  }
  encode_header(w, m.header);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.text(meta);
  std::visit(
      [&](const auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        for (const auto& v : values) {
          if constexpr (std::is_same_v<T, float>) {
            w.f32(v);
          } else if constexpr (std::is_same_v<T, std::complex<float>>) {
            w.f32(v.real());
            w.f32(v.imag());
          } else {
            w.u16(v);
          }
        }
      },
      m.pixels);
}

void encode_payload(ByteWriter& w, const Waveform& m) {
  if (!(m.sample_period_ms > 0.0f)) throw EncodeError("waveform sample_period_ms must be > 0");
  auto type = static_cast<std::uint16_t>(m.wf_type);
  if (type != 1 && type != 2) throw EncodeError("waveform wf_type must be 1 or 2");
  w.u16(type);
  w.u32(static_cast<std::uint32_t>(m.samples.size()));
  w.f32(m.sample_period_ms);
  for (float s : m.samples) w.f32(s);
}

Message decode_payload(MessageId id, ByteReader& r) {
  switch (id) {
    case MessageId::kConfigName:
      return ConfigName{r.text(r.remaining())};
    case MessageId::kConfigInline:
      return ConfigInline{r.text(r.remaining())};
    case MessageId::kSessionHeader:
      return SessionHeader{MetaAttributes::parse(r.text(r.remaining()))};
    case MessageId::kClose:
      return Close{};
    case MessageId::kText:
      return Text{r.text(r.remaining())};
    case MessageId::kReport:
      return Report{r.text(r.remaining())};
    case MessageId::kAcquisition: {
      KSpaceReadout m;
      m.header = decode_readout_header(r);
      std::size_t n = std::size_t(m.header.num_samples) * m.header.num_coils;
      if (r.remaining() != n * 8) {
        throw DecodeError("readout payload has " + std::to_string(r.remaining()) +
                          " sample bytes, header implies " + std::to_string(n * 8));
      }
      m.samples.resize(n);
      for (auto& s : m.samples) {
        float re = r.f32();
        float im = r.f32();
        s = {re, im};
      }
      check_readout<DecodeError>(m);
      return m;
    }
    case MessageId::kImage: {
      ImageFrame m;
      m.header = decode_image_header(r);
      check_image_header<DecodeError>(m.header);
      std::uint32_t meta_len = r.u32();
      m.meta = MetaAttributes::parse(r.text(meta_len));
      std::size_t n = m.header.pixel_count();
      std::size_t expected = n * pixel_width(m.header.data_type);
      if (r.remaining() != expected) {
        throw DecodeError("image payload has " + std::to_string(r.remaining()) +
                          " pixel bytes, header implies " + std::to_string(expected));
      }
      switch (m.header.data_type) {
        case PixelType::kFloat: {
          std::vector<float> px(n);
          for (auto& v : px) v = r.f32();
          m.pixels = std::move(px);
          break;
        }
        case PixelType::kComplex: {
          std::vector<std::complex<float>> px(n);
          for (auto& v : px) {
            float re = r.f32();
            float im = r.f32();
            v = {re, im};
          }
          m.pixels = std::move(px);
          break;
        }
        case PixelType::kLabel: {
          std::vector<std::uint16_t> px(n);
          for (auto& v : px) v = r.u16();
          m.pixels = std::move(px);
          break;
        }
      }
      return m;
    }
    case MessageId::kWaveform: {
      Waveform m;
      auto type = r.u16();
      if (type != 1 && type != 2) {
        throw DecodeError("waveform wf_type " + std::to_string(type) + " is unknown");
      }
      m.wf_type = static_cast<WaveformType>(type);
      std::uint32_t count = r.u32();
      m.sample_period_ms = r.f32();
      if (!(m.sample_period_ms > 0.0f)) throw DecodeError("waveform sample_period_ms must be > 0");
      if (r.remaining() != std::size_t(count) * 4) {
        throw DecodeError("waveform payload does not match num_wf_samples");
      }
      m.samples.resize(count);
      for (auto& s : m.samples) s = r.f32();
      return m;
    }
  }
  throw ProtocolError("unknown message id");
}

}  // namespace

bool is_known_message_id(std::uint16_t id) {
  return (id >= 1 && id <= 5) || (id >= 10 && id <= 13);
}

const char* message_name(MessageId id) {
  switch (id) {
    case MessageId::kConfigName: return "CONFIG_NAME";
    case MessageId::kConfigInline: return "CONFIG_INLINE";
    case MessageId::kSessionHeader: return "SESSION_HEADER";
    case MessageId::kClose: return "CLOSE";
    case MessageId::kText: return "TEXT";
    case MessageId::kAcquisition: return "ACQUISITION";
    case MessageId::kImage: return "IMAGE";
    case MessageId::kWaveform: return "WAVEFORM";
    case MessageId::kReport: return "REPORT";
  }
  return "UNKNOWN";
}

std::size_t pixel_width(PixelType type) {
  switch (type) {
    case PixelType::kFloat: return 4;
    case PixelType::kComplex: return 8;
    case PixelType::kLabel: return 2;
  }
  return 0;
}

MessageId message_id(const Message& message) {
  static constexpr MessageId ids[] = {
      MessageId::kConfigName,  MessageId::kConfigInline, MessageId::kSessionHeader,
      MessageId::kClose,       MessageId::kText,         MessageId::kAcquisition,
      MessageId::kImage,       MessageId::kWaveform,     MessageId::kReport,
  };
  return ids[message.index()];
}

void encode_message_into(const Message& message, Bytes& out) {
  ByteWriter w(out);
  std::size_t start = w.size();
  w.u32(0);
  w.u16(static_cast<std::uint16_t>(message_id(message)));
  std::visit([&](const auto& m) { encode_payload(w, m); }, message);
  std::size_t length = w.size() - start - 4;
  if (length > kMaxFrameLength) throw EncodeError("frame exceeds maximum length");
  w.patch_u32(start, static_cast<std::uint32_t>(length));
}

Bytes encode_message(const Message& message) {
  Bytes out;
  encode_message_into(message, out);
  return out;
}

DecodeResult decode_message(ByteView bytes) {
  if (bytes.size() < 4) return NeedMoreBytes{kFramePrefix};
  ByteReader prefix(bytes);
  std::uint32_t length = prefix.u32();
  if (length < 2) throw ProtocolError("frame length " + std::to_string(length) + " < 2");
  if (length > kMaxFrameLength) {
    throw ProtocolError("frame length " + std::to_string(length) + " exceeds maximum");
  }
  std::size_t total = 4 + std::size_t(length);
  if (bytes.size() < kFramePrefix) return NeedMoreBytes{total};
  std::uint16_t id = prefix.u16();
  if (!is_known_message_id(id)) {
    throw ProtocolError("unknown message id " + std::to_string(id));
  }
  if (bytes.size() < total) return NeedMoreBytes{total};

  ByteReader payload(bytes.subspan(kFramePrefix, length - 2));
  try {
    Message m = decode_payload(static_cast<MessageId>(id), payload);
    if (!payload.exhausted()) {
      throw DecodeError(std::string(message_name(static_cast<MessageId>(id))) + " has " +
                        std::to_string(payload.remaining()) + " trailing bytes");
    }
    return Decoded{std::move(m), total};
  } catch (const ShortRead& e) {
    throw DecodeError(std::string(message_name(static_cast<MessageId>(id))) +
                      " payload truncated: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DecodeError(std::string(message_name(static_cast<MessageId>(id))) + ": " + e.what());
  }
}

void FrameDecoder::feed(ByteView chunk) {
  if (head_ > 0 && head_ >= buffer_.size() / 2) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(head_));
    head_ = 0;
  }
  buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
}

std::optional<Message> FrameDecoder::next() {
  ByteView pending(buffer_.data() + head_, buffer_.size() - head_);
  DecodeResult result;
  try {
    result = decode_message(pending);
  } catch (const DecodeError& e) {
    throw DecodeError(e.what(), consumed_);
  } catch (const ProtocolError& e) {
    throw ProtocolError(e.what(), consumed_);
  }
  if (std::holds_alternative<NeedMoreBytes>(result)) return std::nullopt;
  auto& decoded = std::get<Decoded>(result);
  head_ += decoded.consumed;
  consumed_ += decoded.consumed;
  return std::move(decoded.message);
}

}  // namespace icmr::wire
