#include "icmr/wire/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <system_error>

namespace icmr::wire {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::system_error(errno, std::generic_category(), what);
}

}  // namespace

SocketTransport::SocketTransport(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

SocketTransport::~SocketTransport() {
  if (fd_ >= 0) ::close(fd_);
}

std::size_t SocketTransport::read_some(std::span<std::uint8_t> buffer) {
  for (;;) {
    ssize_t n = ::recv(fd_, buffer.data(), buffer.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET || errno == ENOTCONN) return 0;
    throw_errno("recv");
  }
}

void SocketTransport::write_all(ByteView data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

void SocketTransport::close_write() { ::shutdown(fd_, SHUT_WR); }

void SocketTransport::interrupt_read() { ::shutdown(fd_, SHUT_RD); }

Endpoint Endpoint::parse(const std::string& text) {
  Endpoint ep;
  auto colon = text.rfind(':');
  std::string port_text = text;
  if (colon != std::string::npos) {
    ep.host = text.substr(0, colon);
    port_text = text.substr(colon + 1);
    if (ep.host.empty() || ep.host == "localhost") ep.host = "127.0.0.1";
  }
  try {
    unsigned long port = std::stoul(port_text);
    if (port == 0 || port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad endpoint '" + text + "', expected host:port");
  }
  return ep;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

std::unique_ptr<SocketTransport> connect_tcp(const Endpoint& endpoint) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  std::string port = std::to_string(endpoint.port);
  int rc = ::getaddrinfo(endpoint.host.c_str(), port.c_str(), &hints, &result);
  if (rc != 0) {
    throw std::runtime_error("resolve " + endpoint.to_string() + ": " + gai_strerror(rc));
  }
  int fd = -1;
  int last_errno = 0;
  for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    last_errno = errno;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0) {
    errno = last_errno;
    throw_errno("connect " + endpoint.to_string());
  }
  return std::make_unique<SocketTransport>(fd);
}

TcpListener::TcpListener(std::uint16_t port, const std::string& bind_host) {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw_errno("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw std::invalid_argument("bad bind address " + bind_host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    int saved = errno;
    ::close(fd_);
    errno = saved;
    throw_errno("bind port " + std::to_string(port));
  }
  if (::listen(fd_, 64) != 0) {
    int saved = errno;
    ::close(fd_);
    errno = saved;
    throw_errno("listen");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<SocketTransport> TcpListener::accept() {
  for (;;) {
    int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) return std::make_unique<SocketTransport>(fd);
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return nullptr;
  }
}

void TcpListener::shutdown() { ::shutdown(fd_, SHUT_RDWR); }

namespace {

struct PipeDirection {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::uint8_t> data;
  bool writer_closed = false;
  bool reader_interrupted = false;
};

class MemoryTransport : public Transport {
 public:
  MemoryTransport(std::shared_ptr<PipeDirection> in, std::shared_ptr<PipeDirection> out)
      : in_(std::move(in)), out_(std::move(out)) {}

  ~MemoryTransport() override {
    close_write();
    interrupt_read();
  }

  std::size_t read_some(std::span<std::uint8_t> buffer) override {
    std::unique_lock lock(in_->mutex);
    in_->cv.wait(lock, [&] {
      return !in_->data.empty() || in_->writer_closed || in_->reader_interrupted;
    });
    if (in_->reader_interrupted) return 0;
    std::size_t n = std::min(buffer.size(), in_->data.size());
    std::copy_n(in_->data.begin(), n, buffer.begin());
    in_->data.erase(in_->data.begin(), in_->data.begin() + static_cast<std::ptrdiff_t>(n));
    return n;
  }

  void write_all(ByteView data) override {
    std::lock_guard lock(out_->mutex);
    if (out_->writer_closed || out_->reader_interrupted) {
      throw std::runtime_error("memory pipe: peer closed");
    }
    out_->data.insert(out_->data.end(), data.begin(), data.end());
    out_->cv.notify_all();
  }

  void close_write() override {
    std::lock_guard lock(out_->mutex);
    out_->writer_closed = true;
    out_->cv.notify_all();
  }

  void interrupt_read() override {
    std::lock_guard lock(in_->mutex);
    in_->reader_interrupted = true;
    in_->cv.notify_all();
  }

 private:
  std::shared_ptr<PipeDirection> in_;
  std::shared_ptr<PipeDirection> out_;
};

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_memory_pipe() {
  auto a_to_b = std::make_shared<PipeDirection>();
  auto b_to_a = std::make_shared<PipeDirection>();
  return {std::make_unique<MemoryTransport>(b_to_a, a_to_b),
          std::make_unique<MemoryTransport>(a_to_b, b_to_a)};
}

}  // namespace icmr::wire
