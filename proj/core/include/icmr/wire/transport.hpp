#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>

#include "icmr/wire/bytes.hpp"

namespace icmr::wire {

// Ordered, reliable, full-duplex byte stream.
class Transport {
 public:
  virtual ~Transport() = default;

  // Blocks until at least one byte is available. Returns 0 at end of stream.
  virtual std::size_t read_some(std::span<std::uint8_t> buffer) = 0;
  // Throws std::system_error / std::runtime_error when the peer is gone.
  virtual void write_all(ByteView data) = 0;
  // Signals end of stream to the peer (half close).
  virtual void close_write() = 0;
  // Unblocks a pending read_some, which then returns 0. Safe to call from
  // another thread.
  virtual void interrupt_read() = 0;
};

// Transport over a connected socket. Owns the descriptor.
class SocketTransport : public Transport {
 public:
  explicit SocketTransport(int fd);
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  std::size_t read_some(std::span<std::uint8_t> buffer) override;
  void write_all(ByteView data) override;
  void close_write() override;
  void interrupt_read() override;

  int fd() const { return fd_; }

 private:
  int fd_;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  // "host:port"; a bare port means localhost.
  static Endpoint parse(const std::string& text);
  std::string to_string() const;
};

std::unique_ptr<SocketTransport> connect_tcp(const Endpoint& endpoint);

// Listening TCP socket. Port 0 binds an ephemeral port.
class TcpListener {
 public:
  explicit TcpListener(std::uint16_t port, const std::string& bind_host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  // Returns nullptr once shutdown() has been called.
  std::unique_ptr<SocketTransport> accept();
  void shutdown();

 private:
  int fd_;
  std::uint16_t port_;
};

// Two connected in-process endpoints. Used by tests and benchmarks.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_memory_pipe();

}  // namespace icmr::wire
