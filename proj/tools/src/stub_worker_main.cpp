#include <unistd.h>

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "icmr/infer/stub_worker.hpp"
#include "icmr/wire/transport.hpp"

// Built-in conformance worker. Speaks the worker protocol on stdin/stdout,
// or on TCP connections accepted one at a time with --listen.
int main(int argc, char** argv) {
  CLI::App app{"icmr-stub-worker: native stub model worker"};
  icmr::infer::StubWorkerOptions options;
  int listen_port = -1;
  bool once = false;
  app.add_option("--log", options.log_path, "append one line per received message to this file");
  app.add_option("--listen", listen_port, "serve TCP connections on this port instead of stdio")
      ->check(CLI::Range(0, 65535));
  app.add_flag("--once", once, "with --listen: exit after the first connection");
  CLI11_PARSE(app, argc, argv);
  std::signal(SIGPIPE, SIG_IGN);

  if (listen_port < 0) return icmr::infer::run_stub_worker(STDIN_FILENO, STDOUT_FILENO, options);

  icmr::wire::TcpListener listener(static_cast<std::uint16_t>(listen_port));
  std::cout << "icmr-stub-worker listening on port " << listener.port() << std::endl;
  int rc = 0;
  while (auto conn = listener.accept()) {
    rc = icmr::infer::run_stub_worker(conn->fd(), conn->fd(), options);
    if (once) break;
  }
  return rc;
}
