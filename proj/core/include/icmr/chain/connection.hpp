#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "icmr/chain/gadget.hpp"
#include "icmr/chain/session_store.hpp"
#include "icmr/wire/transport.hpp"

namespace icmr::chain {

using TimePoint = std::chrono::steady_clock::time_point;

struct StageStats {
  std::string name;
  std::size_t items_in = 0;
  std::size_t items_out = 0;
  std::optional<TimePoint> first_emit;
  std::optional<TimePoint> last_emit;
};

struct ConnectionSummary {
  std::string chain_name;
  std::vector<StageStats> stages;
  std::size_t messages_in = 0;
  std::size_t acquisitions_in = 0;
  std::size_t messages_out = 0;
  std::size_t dropped = 0;  // non-wire items that reached the writer
  std::optional<TimePoint> first_byte;
  std::optional<TimePoint> last_acquisition;
  std::optional<TimePoint> closed;
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
  const StageStats* stage(const std::string& name) const;
};

struct ServerOptions {
  std::uint16_t port = 9122;
  std::filesystem::path chains_dir = "chains";
  std::size_t queue_capacity = 64;
  SessionStore::Options store;
  PropertyMap gadget_defaults;
};

// Runs one client connection to completion: reads the chain selection and
// session header, assembles the chain, streams items through one thread per
// stage, flushes on CLOSE and writes all results back before closing. Every
// per-connection resource is released before returning.
ConnectionSummary serve_connection(wire::Transport& transport, const GadgetRegistry& registry,
                                   SessionStore& store, const ServerOptions& options);

// Reads <chains_dir>/<name>.ini. Names containing path separators are
// rejected.
std::string load_named_chain(const std::filesystem::path& chains_dir, const std::string& name);

// TCP accept loop. Each connection is served on its own thread.
class Server {
 public:
  using SummaryCallback = std::function<void(const ConnectionSummary&)>;

  Server(const GadgetRegistry& registry, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts accepting. Port 0 picks an ephemeral port.
  void start();
  // Stops accepting and waits for in-flight connections to finish.
  void stop();

  std::uint16_t port() const;
  std::size_t connections_served() const { return served_.load(); }
  std::size_t active_connections() const;
  SessionStore& store() { return store_; }
  void on_summary(SummaryCallback callback) { callback_ = std::move(callback); }

 private:
  void accept_loop();
  void reap_finished();

  struct Worker {
    std::thread thread;
    std::atomic<bool> done{false};
  };

  const GadgetRegistry& registry_;
  ServerOptions options_;
  SessionStore store_;
  std::unique_ptr<wire::TcpListener> listener_;
  std::thread accept_thread_;
  mutable std::mutex workers_mutex_;
  std::list<Worker> workers_;
  std::atomic<std::size_t> served_{0};
  SummaryCallback callback_;
};

}  // namespace icmr::chain
