#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "icmr/wire/bytes.hpp"
#include "icmr/wire/messages.hpp"

namespace icmr::wire {

// Frame layout: u32 length (message id + payload bytes), u16 message id,
// payload. Everything little-endian, no padding.
inline constexpr std::size_t kFramePrefix = 6;
inline constexpr std::uint32_t kMaxFrameLength = 1u << 28;

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A field violates its type invariant on the encode side.
class EncodeError : public WireError {
 public:
  using WireError::WireError;
};

// The byte stream is not ICSP: unknown message id or impossible length.
class ProtocolError : public WireError {
 public:
  ProtocolError(const std::string& what, std::size_t offset = 0)
      : WireError(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// A well-framed payload whose content violates a type invariant.
class DecodeError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

Bytes encode_message(const Message& message);
void encode_message_into(const Message& message, Bytes& out);

struct Decoded {
  Message message;
  std::size_t consumed = 0;
};

// Not an error: the frame is incomplete. `total` is the full frame size
// once the prefix is known, otherwise the minimum (prefix) size.
struct NeedMoreBytes {
  std::size_t total = kFramePrefix;
};

using DecodeResult = std::variant<Decoded, NeedMoreBytes>;

// Decodes exactly one frame from the start of `bytes`.
DecodeResult decode_message(ByteView bytes);

// Incremental decoder for arbitrarily chunked input.
class FrameDecoder {
 public:
  void feed(ByteView chunk);
  // Returns the next complete message, or nullopt when more bytes are
  // needed. Errors carry the absolute stream offset of the bad frame.
  std::optional<Message> next();

  std::size_t buffered() const { return buffer_.size() - head_; }
  std::size_t stream_offset() const { return consumed_; }

 private:
  Bytes buffer_;
  std::size_t head_ = 0;
  std::size_t consumed_ = 0;
};

}  // namespace icmr::wire
