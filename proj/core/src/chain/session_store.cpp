#include "icmr/chain/session_store.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <stdexcept>

namespace icmr::chain {

SessionStore::SessionStore(Options options, ClockFn clock)
    : options_(options), clock_(std::move(clock)) {
  if (options_.capacity == 0) throw std::invalid_argument("session store capacity must be > 0");
}

void SessionStore::purge_expired_locked(Clock::time_point now) const {
  std::erase_if(entries_, [&](const auto& kv) { return now - kv.second.inserted >= options_.ttl; });
}

void SessionStore::put(const std::string& session_key, const std::string& kind,
                       std::string payload) {
  if (session_key.empty() || kind.empty()) {
    throw std::invalid_argument("session store keys must be non-empty");
  }
  std::lock_guard lock(mutex_);
  auto now = clock_();
  purge_expired_locked(now);
  Key key{session_key, kind};
  if (!entries_.contains(key) && entries_.size() >= options_.capacity) {
    auto oldest = std::min_element(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
      return a.second.sequence < b.second.sequence;
    });
    spdlog::warn("session store full ({} entries), evicting {}/{}", entries_.size(),
                 oldest->first.first, oldest->first.second);
    entries_.erase(oldest);
    ++evictions_;
  }
  entries_[key] = Entry{std::move(payload), now, next_sequence_++};
}

std::optional<std::string> SessionStore::get(const std::string& session_key,
                                             const std::string& kind) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(Key{session_key, kind});
  if (it == entries_.end()) return std::nullopt;
  if (clock_() - it->second.inserted >= options_.ttl) {
    entries_.erase(it);
    return std::nullopt;
  }
  return it->second.payload;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  purge_expired_locked(clock_());
  return entries_.size();
}

std::size_t SessionStore::evictions() const {
  std::lock_guard lock(mutex_);
  return evictions_;
}

}  // namespace icmr::chain
