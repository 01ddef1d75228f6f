#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "icmr/infer/tensor.hpp"
#include "icmr/wire/bytes.hpp"

namespace icmr::infer {

// Worker transport messages. Framing is the same as ICSP (u32 length,
// u16 id, payload) with its own id space.
enum class WorkerMessageId : std::uint16_t {
  kLoad = 1,
  kLoadAck = 2,
  kInfer = 3,
  kResult = 4,
  kShutdown = 5,
};

struct LoadRequest {
  std::string model_id;
  std::string device;
  std::map<std::string, std::string> params;
  bool operator==(const LoadRequest&) const = default;
};

struct LoadAck {
  bool ok = true;
  std::string text;
  bool operator==(const LoadAck&) const = default;
};

struct InferRequest {
  std::uint32_t request_id = 0;
  std::vector<Tensor> tensors;
  bool operator==(const InferRequest&) const = default;
};

struct InferResult {
  std::uint32_t request_id = 0;
  bool ok = true;
  std::string error;
  std::vector<Tensor> tensors;
  bool operator==(const InferResult&) const = default;
};

struct ShutdownRequest {
  bool operator==(const ShutdownRequest&) const = default;
};

using WorkerMessage = std::variant<LoadRequest, LoadAck, InferRequest, InferResult, ShutdownRequest>;

WorkerMessageId worker_message_id(const WorkerMessage& message);

class WorkerProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

wire::Bytes encode_worker_message(const WorkerMessage& message);

// Incremental decoder, same chunking contract as wire::FrameDecoder.
class WorkerFrameDecoder {
 public:
  void feed(wire::ByteView chunk);
  // Throws WorkerProtocolError on an unknown id or malformed payload.
  std::optional<WorkerMessage> next();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  wire::Bytes buffer_;
};

}  // namespace icmr::infer
