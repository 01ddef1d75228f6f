#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "icmr/chain/connection.hpp"
#include "icmr/gadgets.hpp"

namespace {

std::string sibling_worker() {
  std::error_code ec;
  auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    auto candidate = self.parent_path() / "icmr-stub-worker";
    if (std::filesystem::exists(candidate)) return candidate.string();
  }
  return "icmr-stub-worker";
}

std::uint16_t default_port() {
  if (const char* env = std::getenv("ICSP_PORT")) {
    try {
      unsigned long p = std::stoul(env);
      if (p <= 65535) return static_cast<std::uint16_t>(p);
    } catch (const std::logic_error&) {
    }
    spdlog::warn("ignoring ICSP_PORT='{}'", env);
  }
  return 9122;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"icmr-server: inline cardiac MR streaming inference server"};
  icmr::chain::ServerOptions options;
  options.port = default_port();
  std::string chains_dir = "chains";
  std::string log_level = "info";
  std::string worker_cmd = sibling_worker();
  long ttl_s = 2 * 60 * 60;
  std::size_t capacity = 256;
  app.add_option("--port", options.port, "TCP port (0 = ephemeral; env ICSP_PORT)");
  app.add_option("--chains-dir", chains_dir, "directory of <name>.ini chain configurations");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  app.add_option("--worker-cmd", worker_cmd, "default command for inference workers");
  app.add_option("--store-ttl-s", ttl_s, "session store time-to-live, seconds")->check(CLI::PositiveNumber);
  app.add_option("--store-capacity", capacity, "session store capacity, sessions")->check(CLI::PositiveNumber);
  app.add_option("--queue-capacity", options.queue_capacity, "items per inter-stage queue")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  spdlog::set_level(spdlog::level::from_str(log_level));
  options.chains_dir = chains_dir;
  options.store.ttl = std::chrono::seconds(ttl_s);
  options.store.capacity = capacity;
  options.gadget_defaults["worker_cmd"] = worker_cmd;

  // Block the termination signals before any thread starts so only sigwait
  // below sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::signal(SIGPIPE, SIG_IGN);

  const auto registry = icmr::make_default_registry();
  icmr::chain::Server server(registry, options);
  server.on_summary([](const icmr::chain::ConnectionSummary& s) {
    if (s.ok()) {
      spdlog::info("connection done: chain '{}', {} messages in, {} out, {} dropped", s.chain_name,
                   s.messages_in, s.messages_out, s.dropped);
    } else {
      spdlog::warn("connection failed: chain '{}': {}", s.chain_name, *s.error);
    }
  });
  try {
    server.start();
  } catch (const std::exception& e) {
    spdlog::error("cannot start: {}", e.what());
    return 1;
  }
  std::cout << "icmr-server listening on port " << server.port() << std::endl;
  spdlog::info("chains from {}, worker '{}'", chains_dir, worker_cmd);

  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {}: stopping", sig);
  server.stop();
  spdlog::info("served {} connections", server.connections_served());
  return 0;
}
