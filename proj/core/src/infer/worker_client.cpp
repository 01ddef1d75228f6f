#include "icmr/infer/worker_client.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <spdlog/spdlog.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <sstream>
#include <thread>

#include "icmr/wire/transport.hpp"

extern char** environ;

namespace icmr::infer {

namespace {

std::atomic<std::uint64_t> g_serial{1};

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::vector<std::string> split_command(const std::string& cmd) {
  std::istringstream in(cmd);
  std::vector<std::string> args;
  for (std::string a; in >> a;) args.push_back(a);
  return args;
}

using Clock = std::chrono::steady_clock;

}  // namespace

Device parse_device(const std::string& text) {
  if (text == "cpu" || text.empty()) return Device::kCpu;
  if (text == "gpu") return Device::kGpu;
  throw std::invalid_argument("unknown device '" + text + "', expected cpu or gpu");
}

const char* device_name(Device device) { return device == Device::kGpu ? "gpu" : "cpu"; }

std::unique_ptr<WorkerClient> WorkerClient::launch(const ModelSpec& spec) {
  ignore_sigpipe();
  std::unique_ptr<WorkerClient> client(new WorkerClient());
  client->serial_ = g_serial++;

  if (!spec.worker_endpoint.empty()) {
    auto socket = wire::connect_tcp(wire::Endpoint::parse(spec.worker_endpoint));
    int fd = ::dup(socket->fd());
    if (fd < 0) throw WorkerError("dup worker socket failed");
    ::fcntl(fd, F_SETFD, FD_CLOEXEC);
    client->read_fd_ = fd;
    client->write_fd_ = fd;
    return client;
  }

  auto args = split_command(spec.worker_cmd);
  if (args.empty()) throw WorkerError("no worker_cmd or worker_endpoint configured");

  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw WorkerError("pipe failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw WorkerError("pipe failed");
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  pid_t pid = -1;
  int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw WorkerError("failed to launch worker '" + args[0] + "': " + std::strerror(rc));
  }
  client->pid_ = pid;
  client->write_fd_ = to_child[1];
  client->read_fd_ = from_child[0];
  spdlog::debug("launched worker '{}' pid {}", spec.worker_cmd, pid);
  return client;
}

WorkerClient::~WorkerClient() {
  try {
    shutdown();
  } catch (const std::exception& e) {
    spdlog::warn("worker shutdown: {}", e.what());
  }
}

void WorkerClient::send(const WorkerMessage& message) {
  auto bytes = encode_worker_message(message);
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t n = ::write(write_fd_, bytes.data() + sent, bytes.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw WorkerError("worker connection lost while sending (" + exit_description() + ")");
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string WorkerClient::exit_description() {
  if (pid_ <= 0) return "socket closed";
  int status = 0;
  pid_t r = ::waitpid(pid_, &status, WNOHANG);
  if (r == pid_) {
    pid_ = -1;
    if (WIFEXITED(status)) return "worker exited with status " + std::to_string(WEXITSTATUS(status));
    if (WIFSIGNALED(status)) return "worker killed by signal " + std::to_string(WTERMSIG(status));
  }
  return "worker closed its output";
}

WorkerMessage WorkerClient::receive(Clock::time_point deadline, const char* waiting_for) {
  std::array<std::uint8_t, 64 * 1024> chunk{};
  for (;;) {
    if (auto message = decoder_.next()) return std::move(*message);
    auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (remaining <= 0) throw WorkerError(std::string("timed out waiting for ") + waiting_for);
    pollfd pfd{read_fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1'000'000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw WorkerError("poll on worker failed");
    }
    if (rc == 0) continue;
    ssize_t n = ::read(read_fd_, chunk.data(), chunk.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw WorkerError("read from worker failed");
    }
    if (n == 0) {
      // Give the process a moment to be reapable so the status is reported.
      for (int i = 0; i < 50 && pid_ > 0; ++i) {
        int status = 0;
        if (::waitpid(pid_, &status, WNOHANG) == pid_) {
          pid_ = -1;
          std::string how = WIFEXITED(status)
                                ? "exited with status " + std::to_string(WEXITSTATUS(status))
                                : "was killed by signal " + std::to_string(WTERMSIG(status));
          throw WorkerError(std::string("worker ") + how + " while waiting for " + waiting_for);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
      throw WorkerError(std::string("worker closed its output while waiting for ") + waiting_for);
    }
    decoder_.feed(wire::ByteView(chunk.data(), static_cast<std::size_t>(n)));
  }
}

ModelHandle WorkerClient::load(const ModelSpec& spec) {
  if (shut_down_) throw WorkerError("worker already shut down");
  if (loaded_) throw WorkerError("model already loaded in this worker");
  LoadRequest request{spec.model_id, device_name(spec.device),
                      std::map<std::string, std::string>(spec.params.begin(), spec.params.end())};
  send(request);
  ++loads_sent_;
  auto reply = receive(Clock::now() + spec.load_timeout, "LOAD_ACK");
  auto* ack = std::get_if<LoadAck>(&reply);
  if (!ack) throw WorkerError("worker answered LOAD with an unexpected message");
  if (!ack->ok) throw WorkerError("worker refused model '" + spec.model_id + "': " + ack->text);
  loaded_ = true;
  return ModelHandle{serial_, spec.model_id};
}

std::vector<Tensor> WorkerClient::infer(const ModelHandle& handle, std::vector<Tensor> inputs,
                                        std::chrono::milliseconds timeout) {
  if (shut_down_ || handle.worker_serial != serial_ || !loaded_) {
    throw WorkerError("model handle for '" + handle.model_id + "' is not valid for this worker");
  }
  const std::uint32_t id = next_request_++;
  send(InferRequest{id, std::move(inputs)});
  ++infers_sent_;
  auto deadline = Clock::now() + timeout;
  for (;;) {
    auto reply = receive(deadline, "RESULT");
    auto* result = std::get_if<InferResult>(&reply);
    if (!result) throw WorkerError("worker answered INFER with an unexpected message");
    if (result->request_id < id) {
      spdlog::warn("discarding stale RESULT {} (waiting for {})", result->request_id, id);
      continue;
    }
    if (result->request_id != id) {
      throw WorkerError("worker answered request " + std::to_string(id) + " with RESULT " +
                        std::to_string(result->request_id));
    }
    if (!result->ok) throw WorkerError("model '" + handle.model_id + "' failed: " + result->error);
    for (const auto& t : result->tensors) {
      if (!t.consistent()) throw WorkerError("worker returned malformed tensor '" + t.name + "'");
    }
    return std::move(result->tensors);
  }
}

void WorkerClient::shutdown(std::chrono::milliseconds grace) {
  if (shut_down_) return;
  shut_down_ = true;
  try {
    send(ShutdownRequest{});
  } catch (const WorkerError&) {
  }
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  write_fd_ = read_fd_ = -1;

  if (pid_ > 0) {
    auto deadline = Clock::now() + grace;
    int status = 0;
    for (;;) {
      pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_ || r < 0) break;
      if (Clock::now() >= deadline) {
        spdlog::warn("worker pid {} ignored SHUTDOWN, killing", pid_);
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    pid_ = -1;
  }
}

}  // namespace icmr::infer
