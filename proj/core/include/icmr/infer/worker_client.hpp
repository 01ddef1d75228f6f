#pragma once

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "icmr/infer/tensor.hpp"
#include "icmr/infer/worker_protocol.hpp"

namespace icmr::infer {

enum class Device { kCpu, kGpu };

Device parse_device(const std::string& text);
const char* device_name(Device device);

struct ModelSpec {
  std::string model_id;
  Device device = Device::kCpu;
  // Either a command line to spawn (stdio transport) or host:port of a
  // running worker. The command is split on whitespace.
  std::string worker_cmd;
  std::string worker_endpoint;
  std::map<std::string, std::string> params;
  std::chrono::milliseconds load_timeout{30'000};
};

class WorkerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Refers to a model loaded in one worker. Invalid after that worker shuts
// down.
struct ModelHandle {
  std::uint64_t worker_serial = 0;
  std::string model_id;
};

// Owns one model-worker process (or socket connection) for the lifetime of
// a chain. Requests are strictly serialized.
class WorkerClient {
 public:
  static std::unique_ptr<WorkerClient> launch(const ModelSpec& spec);
  ~WorkerClient();
  WorkerClient(const WorkerClient&) = delete;
  WorkerClient& operator=(const WorkerClient&) = delete;

  // Sends LOAD and waits for LOAD_ACK. Throws WorkerError with the worker's
  // text on refusal, timeout or crash.
  ModelHandle load(const ModelSpec& spec);

  std::vector<Tensor> infer(const ModelHandle& handle, std::vector<Tensor> inputs,
                            std::chrono::milliseconds timeout);

  // SHUTDOWN, then SIGKILL if the process has not exited after grace.
  // Idempotent.
  void shutdown(std::chrono::milliseconds grace = std::chrono::seconds(5));

  pid_t pid() const { return pid_; }
  bool alive() const { return !shut_down_; }
  std::size_t loads_sent() const { return loads_sent_; }
  std::size_t infers_sent() const { return infers_sent_; }

 private:
  WorkerClient() = default;

  void send(const WorkerMessage& message);
  WorkerMessage receive(std::chrono::steady_clock::time_point deadline, const char* waiting_for);
  std::string exit_description();

  int read_fd_ = -1;
  int write_fd_ = -1;
  pid_t pid_ = -1;
  std::uint64_t serial_ = 0;
  std::uint32_t next_request_ = 1;
  bool shut_down_ = false;
  bool loaded_ = false;
  std::size_t loads_sent_ = 0;
  std::size_t infers_sent_ = 0;
  WorkerFrameDecoder decoder_;
};

}  // namespace icmr::infer
