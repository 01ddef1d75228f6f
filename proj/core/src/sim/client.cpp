#include "icmr/sim/client.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "icmr/wire/codec.hpp"

namespace icmr::sim {

namespace {

using Clock = std::chrono::steady_clock;

constexpr auto kAcquisition = static_cast<std::uint16_t>(wire::MessageId::kAcquisition);
constexpr auto kImage = static_cast<std::uint16_t>(wire::MessageId::kImage);
constexpr auto kReport = static_cast<std::uint16_t>(wire::MessageId::kReport);

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::ofstream open_capture(const std::optional<std::filesystem::path>& path) {
  std::ofstream out;
  if (path) {
    if (path->has_parent_path()) std::filesystem::create_directories(path->parent_path());
    out.open(*path, std::ios::binary | std::ios::trunc);
    if (!out) throw SimError("cannot write capture file " + path->string());
  }
  return out;
}

}  // namespace

std::optional<double> TimingLog::last_acquisition_ms() const {
  bool any_acq = std::find(sent_ids.begin(), sent_ids.end(), kAcquisition) != sent_ids.end();
  const std::uint16_t data_id = any_acq ? kAcquisition : kImage;
  std::optional<double> last;
  for (std::size_t i = 0; i < sent_ids.size() && i < send_ms.size(); ++i) {
    if (sent_ids[i] == data_id) last = send_ms[i];
  }
  return last;
}

std::optional<double> TimingLog::first_image_ms() const {
  for (const auto& r : received) {
    if (r.id == kImage) return r.ms;
  }
  return std::nullopt;
}

std::optional<double> TimingLog::first_result_ms() const {
  for (const auto& r : received) {
    if (r.id == kImage || r.id == kReport) return r.ms;
  }
  return std::nullopt;
}

std::optional<double> TimingLog::completion_ms() const {
  if (received.empty()) return std::nullopt;
  return received.back().ms;
}

std::optional<double> TimingLog::post_acquisition_ms() const {
  auto last = last_acquisition_ms();
  auto done = completion_ms();
  if (!last || !done) return std::nullopt;
  return *done - *last;
}

bool TimingLog::overlapped() const {
  auto first = first_image_ms();
  auto last = last_acquisition_ms();
  return first && last && *first < *last;
}

std::string TimingLog::to_json() const {
  auto opt = [](std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["messages_sent"] = send_ms.size();
  j["messages_received"] = received.size();
  j["last_acquisition_ms"] = opt(last_acquisition_ms());
  j["first_image_ms"] = opt(first_image_ms());
  j["first_result_ms"] = opt(first_result_ms());
  j["completion_ms"] = opt(completion_ms());
  j["post_acquisition_ms"] = opt(post_acquisition_ms());
  j["overlapped"] = overlapped();
  auto recv = nlohmann::json::array();
  for (const auto& r : received) recv.push_back({{"id", r.id}, {"ms", r.ms}});
  j["received"] = std::move(recv);
  // Send times are summarised per message id to keep the file small.
  std::map<std::string, nlohmann::json> sent;
  for (std::size_t i = 0; i < sent_ids.size(); ++i) {
    auto& e = sent[std::to_string(sent_ids[i])];
    if (e.is_null()) e = {{"count", 0}, {"first_ms", send_ms[i]}};
    e["count"] = e["count"].get<std::size_t>() + 1;
    e["last_ms"] = send_ms[i];
  }
  j["sent"] = sent;
  return j.dump(2);
}

std::vector<const wire::Report*> RunResult::reports() const {
  std::vector<const wire::Report*> out;
  for (const auto& m : received) {
    if (auto* r = std::get_if<wire::Report>(&m)) out.push_back(r);
  }
  return out;
}

std::vector<std::string> RunResult::server_errors() const {
  std::vector<std::string> out;
  for (const auto& m : received) {
    if (auto* t = std::get_if<wire::Text>(&m); t && t->line.rfind("ERROR", 0) == 0) out.push_back(t->line);
  }
  return out;
}

RunResult run_client(wire::Transport& transport, const std::vector<wire::Message>& messages,
                     const std::vector<double>& send_ms, const ClientOptions& options) {
  if (options.pacing && send_ms.size() != messages.size()) {
    throw SimError("run_client: send schedule does not match the message list");
  }
  RunResult result;
  std::ofstream sent_capture = open_capture(options.capture_sent);
  std::ofstream recv_capture = open_capture(options.capture_received);

  std::mutex mutex;
  std::condition_variable cv;
  bool receiver_done = false;
  std::optional<std::string> receive_error;
  const auto start = Clock::now();

  std::thread receiver([&] {
    wire::FrameDecoder decoder;
    std::vector<std::uint8_t> buffer(1 << 16);
    try {
      for (;;) {
        std::size_t n = transport.read_some(buffer);
        if (n == 0) break;
        if (recv_capture.is_open()) {
          recv_capture.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(n));
        }
        decoder.feed(wire::ByteView(buffer.data(), n));
        bool closed = false;
        while (auto m = decoder.next()) {
          const double t = ms_since(start);
          const auto id = static_cast<std::uint16_t>(wire::message_id(*m));
          std::lock_guard lock(mutex);
          result.timing.received.push_back({id, t});
          if (std::holds_alternative<wire::Close>(*m)) closed = true;
          result.received.push_back(std::move(*m));
        }
        if (closed) {
          result.server_closed = true;
          break;
        }
      }
      if (!result.server_closed && decoder.buffered() > 0) {
        receive_error = "server stream ended mid-frame";
      }
    } catch (const std::exception& e) {
      receive_error = std::string("receive: ") + e.what();
    }
    std::lock_guard lock(mutex);
    receiver_done = true;
    cv.notify_all();
  });

  std::optional<std::string> send_error;
  wire::Bytes frame;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (options.pacing) {
      auto due = start + std::chrono::duration_cast<Clock::duration>(
                             std::chrono::duration<double, std::milli>(send_ms[i] * options.pacing_scale));
      std::this_thread::sleep_until(due);
    }
    {
      std::lock_guard lock(mutex);
      if (receiver_done && result.server_closed) {
        send_error = "server closed the connection after " + std::to_string(i) + " messages";
        break;
      }
    }
    frame.clear();
    wire::encode_message_into(messages[i], frame);
    try {
      transport.write_all(frame);
    } catch (const std::exception& e) {
      send_error = std::string("send: ") + e.what();
      break;
    }
    if (sent_capture.is_open()) {
      sent_capture.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
    }
    const double t = ms_since(start);
    std::lock_guard lock(mutex);
    result.timing.send_ms.push_back(t);
    result.timing.sent_ids.push_back(static_cast<std::uint16_t>(wire::message_id(messages[i])));
  }

  {
    std::unique_lock lock(mutex);
    const auto limit = std::chrono::duration<double>(options.receive_timeout_s);
    if (!cv.wait_for(lock, limit, [&] { return receiver_done; })) {
      receive_error = "timed out waiting for the server to close";
      lock.unlock();
      transport.interrupt_read();
    }
  }
  receiver.join();

  if (send_error) {
    result.error = send_error;
  } else if (receive_error) {
    result.error = receive_error;
  } else if (!result.server_closed) {
    result.error = "server closed the connection without CLOSE";
  }
  if (auto errors = result.server_errors(); !errors.empty() && !result.error) {
    result.error = errors.front();
  }
  return result;
}

RunResult run_client(const wire::Endpoint& endpoint, const Session& session, const ClientOptions& options) {
  std::unique_ptr<wire::SocketTransport> transport;
  try {
    transport = wire::connect_tcp(endpoint);
  } catch (const std::exception& e) {
    RunResult r;
    r.error = "cannot connect to " + endpoint.to_string() + ": " + e.what();
    return r;
  }
  return run_client(*transport, session.messages, session.send_ms, options);
}

std::vector<wire::Message> read_capture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimError("cannot read capture file " + path.string());
  wire::FrameDecoder decoder;
  std::vector<wire::Message> out;
  std::vector<char> buffer(1 << 20);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    auto n = static_cast<std::size_t>(in.gcount());
    if (n == 0) break;
    decoder.feed(wire::ByteView(reinterpret_cast<const std::uint8_t*>(buffer.data()), n));
    while (auto m = decoder.next()) out.push_back(std::move(*m));
  }
  if (decoder.buffered() > 0) throw SimError("capture file " + path.string() + " ends mid-frame");
  return out;
}

void write_run_dir(const std::filesystem::path& dir, const Session& session, const RunResult& result,
                   const PhantomParams& params) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) throw SimError("cannot write " + (dir / name).string());
    out << text << '\n';
  };
  nlohmann::json j;
  j["kind"] = session_kind_name(session.kind);
  j["chain"] = params.chain.empty() ? default_chain(session.kind) : params.chain;
  j["seed"] = params.seed;
  j["patient_key"] = params.patient_key;
  j["n_slices"] = params.n_slices;
  j["n_phases"] = params.n_phases;
  j["matrix"] = params.matrix;
  j["n_coils"] = params.n_coils;
  j["slice_ms"] = params.slice_ms;
  j["gap_ms"] = params.gap_ms;
  j["messages"] = session.messages.size();
  j["truth"] = nlohmann::json::parse(session.truth.to_json());
  j["client_error"] = result.error ? nlohmann::json(*result.error) : nlohmann::json(nullptr);
  j["server_closed"] = result.server_closed;
  write("session.json", j.dump(2));
  write("timing.json", result.timing.to_json());
  std::size_t k = 0;
  for (const auto* r : result.reports()) write("report_" + std::to_string(k++) + ".json", r->document);
}

}  // namespace icmr::sim
