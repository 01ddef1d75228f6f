#include "icmr/wire/session.hpp"

#include <array>

namespace icmr::wire {

SessionSummary stream_session(Transport& transport, const MessageSink& sink) {
  SessionSummary summary;
  FrameDecoder decoder;
  std::array<std::uint8_t, 64 * 1024> chunk{};
  for (;;) {
    std::size_t n = transport.read_some(chunk);
    if (n == 0) {
      if (decoder.buffered() > 0) {
        summary.error = "transport ended mid-frame (" + std::to_string(decoder.buffered()) +
                        " bytes pending)";
        summary.error_offset = decoder.stream_offset();
      }
      return summary;
    }
    summary.bytes += n;
    decoder.feed(ByteView(chunk.data(), n));
    try {
      while (auto message = decoder.next()) {
        auto id = static_cast<std::uint16_t>(message_id(*message));
        ++summary.counts[id];
        bool close = std::holds_alternative<Close>(*message);
        sink(std::move(*message));
        if (close) {
          summary.terminated = true;
          return summary;
        }
      }
    } catch (const ProtocolError& e) {
      summary.error = e.what();
      summary.error_offset = e.offset();
      return summary;
    }
  }
}

}  // namespace icmr::wire
