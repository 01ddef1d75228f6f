#include "icmr/infer/worker_protocol.hpp"

#include "icmr/wire/codec.hpp"

namespace icmr::infer {

namespace {

void short_string(wire::ByteWriter& w, const std::string& s) {
  if (s.size() > 0xFFFF) throw WorkerProtocolError("string field longer than 65535 bytes");
  w.u16(static_cast<std::uint16_t>(s.size()));
  w.text(s);
}

void long_string(wire::ByteWriter& w, const std::string& s) {
  w.u32(static_cast<std::uint32_t>(s.size()));
  w.text(s);
}

void tensors_out(wire::ByteWriter& w, const std::vector<Tensor>& tensors) {
  if (tensors.size() > 0xFFFF) throw WorkerProtocolError("too many tensors");
  w.u16(static_cast<std::uint16_t>(tensors.size()));
  for (const auto& t : tensors) encode_tensor(w, t);
}

std::vector<Tensor> tensors_in(wire::ByteReader& r) {
  std::vector<Tensor> out(r.u16());
  for (auto& t : out) t = decode_tensor(r);
  return out;
}

void encode_payload(wire::ByteWriter& w, const LoadRequest& m) {
  short_string(w, m.model_id);
  short_string(w, m.device);
  w.u16(static_cast<std::uint16_t>(m.params.size()));
  for (const auto& [k, v] : m.params) {
    short_string(w, k);
    short_string(w, v);
  }
}

void encode_payload(wire::ByteWriter& w, const LoadAck& m) {
  w.u8(m.ok ? 1 : 0);
  long_string(w, m.text);
}

void encode_payload(wire::ByteWriter& w, const InferRequest& m) {
  w.u32(m.request_id);
  tensors_out(w, m.tensors);
}

void encode_payload(wire::ByteWriter& w, const InferResult& m) {
  w.u32(m.request_id);
  w.u8(m.ok ? 1 : 0);
  if (m.ok) {
    tensors_out(w, m.tensors);
  } else {
    long_string(w, m.error);
  }
}

void encode_payload(wire::ByteWriter&, const ShutdownRequest&) {}

WorkerMessage decode_payload(std::uint16_t id, wire::ByteReader& r) {
  switch (static_cast<WorkerMessageId>(id)) {
    case WorkerMessageId::kLoad: {
      LoadRequest m;
      m.model_id = r.text(r.u16());
      m.device = r.text(r.u16());
      auto count = r.u16();
      for (std::uint16_t i = 0; i < count; ++i) {
        auto key = r.text(r.u16());
        m.params[key] = r.text(r.u16());
      }
      return m;
    }
    case WorkerMessageId::kLoadAck: {
      LoadAck m;
      m.ok = r.u8() != 0;
      m.text = r.text(r.u32());
      return m;
    }
    case WorkerMessageId::kInfer: {
      InferRequest m;
      m.request_id = r.u32();
      m.tensors = tensors_in(r);
      return m;
    }
    case WorkerMessageId::kResult: {
      InferResult m;
      m.request_id = r.u32();
      m.ok = r.u8() != 0;
      if (m.ok) {
        m.tensors = tensors_in(r);
      } else {
        m.error = r.text(r.u32());
      }
      return m;
    }
    case WorkerMessageId::kShutdown:
      return ShutdownRequest{};
  }
  throw WorkerProtocolError("unknown worker message id " + std::to_string(id));
}

}  // namespace

WorkerMessageId worker_message_id(const WorkerMessage& message) {
  static constexpr WorkerMessageId ids[] = {WorkerMessageId::kLoad, WorkerMessageId::kLoadAck,
                                            WorkerMessageId::kInfer, WorkerMessageId::kResult,
                                            WorkerMessageId::kShutdown};
  return ids[message.index()];
}

wire::Bytes encode_worker_message(const WorkerMessage& message) {
  wire::Bytes out;
  wire::ByteWriter w(out);
  w.u32(0);
  w.u16(static_cast<std::uint16_t>(worker_message_id(message)));
  try {
    std::visit([&](const auto& m) { encode_payload(w, m); }, message);
  } catch (const std::invalid_argument& e) {
    throw WorkerProtocolError(e.what());
  }
  w.patch_u32(0, static_cast<std::uint32_t>(out.size() - 4));
  return out;
}

void WorkerFrameDecoder::feed(wire::ByteView chunk) {
  buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
}

std::optional<WorkerMessage> WorkerFrameDecoder::next() {
  if (buffer_.size() < wire::kFramePrefix) return std::nullopt;
  wire::ByteReader prefix(buffer_);
  std::uint32_t length = prefix.u32();
  std::uint16_t id = prefix.u16();
  if (length < 2 || length > wire::kMaxFrameLength) {
    throw WorkerProtocolError("bad worker frame length " + std::to_string(length));
  }
  if (id < 1 || id > 5) throw WorkerProtocolError("unknown worker message id " + std::to_string(id));
  std::size_t total = 4 + std::size_t(length);
  if (buffer_.size() < total) return std::nullopt;
  wire::ByteReader payload(wire::ByteView(buffer_).subspan(wire::kFramePrefix, length - 2));
  WorkerMessage message;
  try {
    message = decode_payload(id, payload);
  } catch (const wire::ShortRead& e) {
    throw WorkerProtocolError(std::string("truncated worker payload: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw WorkerProtocolError(e.what());
  }
  if (!payload.exhausted()) throw WorkerProtocolError("trailing bytes in worker frame");
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(total));
  return message;
}

}  // namespace icmr::infer
