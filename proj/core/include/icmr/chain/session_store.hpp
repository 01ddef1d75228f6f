#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

namespace icmr::chain {

// Cross-connection artifact store keyed by (session key, artifact kind).
// Lets a later scan pick up results computed by an earlier one. Entries
// expire after the TTL; when full, the oldest entry is evicted.
class SessionStore {
 public:
  using Clock = std::chrono::steady_clock;
  using ClockFn = std::function<Clock::time_point()>;

  struct Options {
    std::chrono::seconds ttl{2 * 60 * 60};
    std::size_t capacity = 256;
  };

  SessionStore() : SessionStore(Options{}) {}
  explicit SessionStore(Options options, ClockFn clock = [] { return Clock::now(); });

  // Throws std::invalid_argument for empty keys.
  void put(const std::string& session_key, const std::string& kind, std::string payload);
  std::optional<std::string> get(const std::string& session_key, const std::string& kind) const;

  std::size_t size() const;
  std::size_t evictions() const;

 private:
  struct Entry {
    std::string payload;
    Clock::time_point inserted;
    std::uint64_t sequence;
  };
  using Key = std::pair<std::string, std::string>;

  void purge_expired_locked(Clock::time_point now) const;

  Options options_;
  ClockFn clock_;
  mutable std::mutex mutex_;
  mutable std::map<Key, Entry> entries_;
  std::uint64_t next_sequence_ = 0;
  std::size_t evictions_ = 0;
};

}  // namespace icmr::chain
