#include "icmr/chain/connection.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <fstream>
#include <sstream>

#include "icmr/chain/bounded_queue.hpp"
#include "icmr/wire/codec.hpp"

namespace icmr::chain {

const StageStats* ConnectionSummary::stage(const std::string& name) const {
  for (const auto& s : stages) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::string load_named_chain(const std::filesystem::path& chains_dir, const std::string& name) {
  if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
      name.find("..") != std::string::npos) {
    throw ConfigError("invalid chain name '" + name + "'");
  }
  auto path = chains_dir / (name + ".ini");
  std::ifstream in(path);
  if (!in) throw ConfigError("no chain named '" + name + "' in " + chains_dir.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

namespace {

struct EndOfStream {};
using Envelope = std::variant<Item, EndOfStream>;
using Queue = BoundedQueue<Envelope>;

struct Aborted {};

class ConnectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TimePoint now() { return std::chrono::steady_clock::now(); }

// Shared between the reader, the stage threads and the writer of one
// connection.
class Pipeline {
 public:
  Pipeline(std::size_t stages, std::size_t capacity, wire::Transport& transport)
      : transport_(transport) {
    for (std::size_t i = 0; i <= stages; ++i) queues_.push_back(std::make_unique<Queue>(capacity));
  }

  Queue& queue(std::size_t i) { return *queues_[i]; }
  std::size_t queue_count() const { return queues_.size(); }

  void fail(const std::string& message) {
    {
      std::lock_guard lock(mutex_);
      if (error_) return;
      error_ = message;
    }
    spdlog::error("chain failure: {}", message);
    for (auto& q : queues_) q->abort();
    transport_.interrupt_read();
  }

  std::optional<std::string> error() const {
    std::lock_guard lock(mutex_);
    return error_;
  }

  std::mutex& write_mutex() { return write_mutex_; }
  bool close_sent = false;

 private:
  wire::Transport& transport_;
  std::vector<std::unique_ptr<Queue>> queues_;
  mutable std::mutex mutex_;
  std::optional<std::string> error_;
  std::mutex write_mutex_;
};

class QueueEmitter : public Emitter {
 public:
  QueueEmitter(Queue& out, StageStats& stats) : out_(out), stats_(stats) {}

  void emit(Item item) override {
    auto t = now();
    if (!stats_.first_emit) stats_.first_emit = t;
    stats_.last_emit = t;
    ++stats_.items_out;
    if (!out_.push(Envelope{std::move(item)})) throw Aborted{};
  }

 private:
  Queue& out_;
  StageStats& stats_;
};

void run_stage(Gadget& gadget, Queue& in, Queue& out, StageStats& stats, Pipeline& pipeline) {
  QueueEmitter emitter(out, stats);
  try {
    while (auto envelope = in.pop()) {
      if (std::holds_alternative<EndOfStream>(*envelope)) {
        gadget.flush(emitter);
        if (!out.push(EndOfStream{})) throw Aborted{};
        return;
      }
      ++stats.items_in;
      gadget.process(std::move(std::get<Item>(*envelope)), emitter);
    }
  } catch (const Aborted&) {
  } catch (const std::exception& e) {
    pipeline.fail("stage '" + stats.name + "': " + e.what());
  } catch (...) {
    pipeline.fail("stage '" + stats.name + "': unknown failure");
  }
}

std::optional<wire::Message> to_message(Item&& item) {
  return std::visit(
      [](auto&& value) -> std::optional<wire::Message> {
        using T = std::decay_t<decltype(value)>;
        if constexpr (std::is_same_v<T, wire::KSpaceReadout> || std::is_same_v<T, wire::ImageFrame> ||
                      std::is_same_v<T, wire::Waveform> || std::is_same_v<T, wire::Text> ||
                      std::is_same_v<T, wire::Report>) {
          return wire::Message{std::move(value)};
        } else {
          return std::nullopt;
        }
      },
      std::move(item));
}

void write_message(wire::Transport& transport, std::mutex& mutex, const wire::Message& message) {
  auto bytes = wire::encode_message(message);
  std::lock_guard lock(mutex);
  transport.write_all(bytes);
}

void run_writer(Queue& in, wire::Transport& transport, Pipeline& pipeline,
                ConnectionSummary& summary) {
  try {
    while (auto envelope = in.pop()) {
      if (std::holds_alternative<EndOfStream>(*envelope)) {
        write_message(transport, pipeline.write_mutex(), wire::Close{});
        pipeline.close_sent = true;
        return;
      }
      auto& item = std::get<Item>(*envelope);
      const char* kind = item_kind(item);
      auto message = to_message(std::move(item));
      if (!message) {
        ++summary.dropped;
        spdlog::warn("writer dropped a {} item with no wire representation", kind);
        continue;
      }
      write_message(transport, pipeline.write_mutex(), *message);
      ++summary.messages_out;
    }
  } catch (const std::exception& e) {
    pipeline.fail(std::string("writer: ") + e.what());
  }
}

std::optional<Item> to_item(wire::Message&& message) {
  return std::visit(
      [](auto&& value) -> std::optional<Item> {
        using T = std::decay_t<decltype(value)>;
        if constexpr (std::is_same_v<T, wire::KSpaceReadout> || std::is_same_v<T, wire::ImageFrame> ||
                      std::is_same_v<T, wire::Waveform> || std::is_same_v<T, wire::Text> ||
                      std::is_same_v<T, wire::Report>) {
          return Item{std::move(value)};
        } else {
          return std::nullopt;
        }
      },
      std::move(message));
}

// Pulls decoded messages off the transport one at a time.
class MessageSource {
 public:
  MessageSource(wire::Transport& transport, ConnectionSummary& summary)
      : transport_(transport), summary_(summary) {}

  // nullopt at end of transport. Throws ProtocolError / ConnectionError.
  std::optional<wire::Message> next() {
    for (;;) {
      if (auto message = decoder_.next()) {
        ++summary_.messages_in;
        return message;
      }
      std::size_t n = transport_.read_some(chunk_);
      if (n == 0) {
        if (decoder_.buffered() > 0) {
          throw wire::ProtocolError("transport ended mid-frame", decoder_.stream_offset());
        }
        return std::nullopt;
      }
      if (!summary_.first_byte) summary_.first_byte = now();
      decoder_.feed(wire::ByteView(chunk_.data(), n));
    }
  }

 private:
  wire::Transport& transport_;
  ConnectionSummary& summary_;
  wire::FrameDecoder decoder_;
  std::array<std::uint8_t, 64 * 1024> chunk_{};
};

void send_error_and_close(wire::Transport& transport, std::mutex& mutex, const std::string& error,
                          bool close_already_sent) {
  try {
    write_message(transport, mutex, wire::Text{"ERROR: " + error});
    if (!close_already_sent) write_message(transport, mutex, wire::Close{});
    transport.close_write();
  } catch (const std::exception& e) {
    spdlog::debug("could not report error to client: {}", e.what());
  }
}

}  // namespace

ConnectionSummary serve_connection(wire::Transport& transport, const GadgetRegistry& registry,
                                   SessionStore& store, const ServerOptions& options) {
  ConnectionSummary summary;
  MessageSource source(transport, summary);
  std::mutex handshake_write_mutex;

  auto reject = [&](const std::string& error) {
    summary.error = error;
    send_error_and_close(transport, handshake_write_mutex, error, false);
    summary.closed = now();
    return summary;
  };

  // Handshake: chain selection, then session header.
  std::optional<std::string> document;
  std::optional<wire::MetaAttributes> header;
  try {
    while (!header) {
      auto message = source.next();
      if (!message) return reject("client disconnected before the session header");
      if (auto* m = std::get_if<wire::ConfigName>(&*message)) {
        if (document) return reject("chain selected twice");
        document = load_named_chain(options.chains_dir, m->name);
        if (summary.chain_name.empty()) summary.chain_name = m->name;
      } else if (auto* m = std::get_if<wire::ConfigInline>(&*message)) {
        if (document) return reject("chain selected twice");
        document = m->document;
      } else if (auto* m = std::get_if<wire::SessionHeader>(&*message)) {
        if (!document) return reject("protocol error: session header before chain configuration");
        header = m->fields;
      } else if (std::holds_alternative<wire::Close>(*message)) {
        summary.closed = now();
        write_message(transport, handshake_write_mutex, wire::Close{});
        transport.close_write();
        return summary;
      } else {
        return reject(std::string("protocol error: ") +
                      wire::message_name(wire::message_id(*message)) +
                      " before chain configuration and session header");
      }
    }
  } catch (const wire::ProtocolError& e) {
    return reject("protocol error at byte " + std::to_string(e.offset()) + ": " + e.what());
  } catch (const std::exception& e) {
    return reject(e.what());
  }

  ConnectionContext context;
  context.session_header = *header;
  context.store = &store;
  context.defaults = options.gadget_defaults;

  std::optional<Chain> chain;
  try {
    auto config = parse_chain_config(*document);
    if (!config.name.empty()) summary.chain_name = config.name;
    if (config.reader_name != "icsp" || config.writer_name != "icsp") {
      throw ConfigError("only the icsp reader and writer are available");
    }
    chain.emplace(Chain::assemble(config, registry, context));
  } catch (const std::exception& e) {
    return reject(std::string("chain assembly failed: ") + e.what());
  }
  spdlog::info("connection: chain '{}' with {} stages", summary.chain_name, chain->size());

  const std::size_t n = chain->size();
  Pipeline pipeline(n, options.queue_capacity, transport);
  summary.stages.resize(n);
  for (std::size_t i = 0; i < n; ++i) summary.stages[i].name = chain->stage_names()[i];

  std::vector<std::thread> threads;
  threads.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    threads.emplace_back(run_stage, std::ref(chain->stage(i)), std::ref(pipeline.queue(i)),
                         std::ref(pipeline.queue(i + 1)), std::ref(summary.stages[i]),
                         std::ref(pipeline));
  }
  threads.emplace_back(run_writer, std::ref(pipeline.queue(n)), std::ref(transport),
                       std::ref(pipeline), std::ref(summary));

  // Reader: feed data messages into the first stage until CLOSE.
  try {
    for (;;) {
      auto message = source.next();
      if (!message) {
        if (!pipeline.error()) pipeline.fail("client disconnected without CLOSE");
        break;
      }
      if (std::holds_alternative<wire::Close>(*message)) {
        pipeline.queue(0).push(EndOfStream{});
        break;
      }
      bool acquisition = std::holds_alternative<wire::KSpaceReadout>(*message);
      auto id = wire::message_id(*message);
      auto item = to_item(std::move(*message));
      if (!item) {
        pipeline.fail(std::string("protocol error: unexpected ") + wire::message_name(id) +
                      " after session start");
        break;
      }
      if (acquisition) {
        summary.last_acquisition = now();
        ++summary.acquisitions_in;
      }
      if (!pipeline.queue(0).push(std::move(*item))) break;
    }
  } catch (const wire::ProtocolError& e) {
    pipeline.fail("protocol error at byte " + std::to_string(e.offset()) + ": " + e.what());
  } catch (const std::exception& e) {
    pipeline.fail(e.what());
  }

  for (auto& t : threads) t.join();

  summary.error = pipeline.error();
  if (summary.error) {
    send_error_and_close(transport, pipeline.write_mutex(), *summary.error, pipeline.close_sent);
  } else {
    try {
      transport.close_write();
    } catch (const std::exception&) {
    }
  }
  // Gadgets (and any worker processes they own) are released here.
  chain.reset();
  summary.closed = now();
  return summary;
}

Server::Server(const GadgetRegistry& registry, ServerOptions options)
    : registry_(registry), options_(std::move(options)), store_(options_.store) {}

Server::~Server() { stop(); }

void Server::start() {
  listener_ = std::make_unique<wire::TcpListener>(options_.port);
  spdlog::info("listening on port {}", listener_->port());
  accept_thread_ = std::thread([this] { accept_loop(); });
}

std::uint16_t Server::port() const { return listener_ ? listener_->port() : 0; }

std::size_t Server::active_connections() const {
  std::lock_guard lock(workers_mutex_);
  std::size_t active = 0;
  for (const auto& w : workers_) active += w.done ? 0 : 1;
  return active;
}

void Server::reap_finished() {
  std::lock_guard lock(workers_mutex_);
  for (auto it = workers_.begin(); it != workers_.end();) {
    if (it->done) {
      it->thread.join();
      it = workers_.erase(it);
    } else {
      ++it;
    }
  }
}

void Server::accept_loop() {
  while (auto transport = listener_->accept()) {
    reap_finished();
    std::lock_guard lock(workers_mutex_);
    auto& worker = workers_.emplace_back();
    worker.thread = std::thread([this, &worker, t = std::shared_ptr<wire::SocketTransport>(
                                                    std::move(transport))]() mutable {
      ConnectionSummary summary;
      try {
        summary = serve_connection(*t, registry_, store_, options_);
      } catch (const std::exception& e) {
        spdlog::error("connection aborted: {}", e.what());
        summary.error = e.what();
      }
      t.reset();
      ++served_;
      if (callback_) callback_(summary);
      worker.done = true;
    });
  }
}

void Server::stop() {
  if (!listener_) return;
  listener_->shutdown();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::lock_guard lock(workers_mutex_);
  for (auto& w : workers_) {
    if (w.thread.joinable()) w.thread.join();
  }
  workers_.clear();
  listener_.reset();
}

}  // namespace icmr::chain
