#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "icmr/wire/codec.hpp"
#include "icmr/wire/transport.hpp"

namespace icmr::wire {

struct SessionSummary {
  std::map<std::uint16_t, std::size_t> counts;  // message id -> count
  std::size_t bytes = 0;
  bool terminated = false;  // CLOSE received
  std::optional<std::string> error;
  std::optional<std::size_t> error_offset;

  std::size_t count(MessageId id) const {
    auto it = counts.find(static_cast<std::uint16_t>(id));
    return it == counts.end() ? 0 : it->second;
  }
  bool ok() const { return !error.has_value(); }
};

using MessageSink = std::function<void(Message&&)>;

// Reads frames from the transport and hands each to the sink in wire order.
// Stops after CLOSE (delivered to the sink) or at end of transport. A
// protocol error, or the transport ending mid-frame, aborts the session and
// records the stream offset of the offending frame.
SessionSummary stream_session(Transport& transport, const MessageSink& sink);

}  // namespace icmr::wire
