#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icmr/sim/phantom.hpp"
#include "icmr/wire/messages.hpp"
#include "icmr/wire/transport.hpp"

namespace icmr::sim {

struct TimingLog {
  std::vector<double> send_ms;  // per sent message, from connect
  std::vector<std::uint16_t> sent_ids;
  struct Receive {
    std::uint16_t id = 0;
    double ms = 0.0;
  };
  std::vector<Receive> received;

  std::optional<double> last_acquisition_ms() const;  // last ACQUISITION or data IMAGE sent
  std::optional<double> first_image_ms() const;       // first IMAGE received
  std::optional<double> first_result_ms() const;      // first IMAGE or REPORT received
  std::optional<double> completion_ms() const;        // last message received
  // Completion time measured from the end of acquisition.
  std::optional<double> post_acquisition_ms() const;
  // First reconstructed image arrived before the last acquisition was sent.
  bool overlapped() const;

  std::string to_json() const;
};

struct ClientOptions {
  bool pacing = true;
  double pacing_scale = 1.0;
  std::optional<std::filesystem::path> capture_sent;      // raw ICSP bytes as sent
  std::optional<std::filesystem::path> capture_received;  // raw ICSP bytes as received
  double receive_timeout_s = 600.0;  // after the last message was sent
};

struct RunResult {
  std::vector<wire::Message> received;
  TimingLog timing;
  bool server_closed = false;  // CLOSE received from the server
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
  std::vector<const wire::Report*> reports() const;
  std::vector<std::string> server_errors() const;  // TEXT lines starting "ERROR"
};

// Sends the session on the transport (full duplex: a receiver thread records
// replies while the caller's thread sends), then waits for the server to
// close. Transport failures are reported in RunResult::error.
RunResult run_client(wire::Transport& transport, const std::vector<wire::Message>& messages,
                     const std::vector<double>& send_ms, const ClientOptions& options = {});

RunResult run_client(const wire::Endpoint& endpoint, const Session& session,
                     const ClientOptions& options = {});

// Raw capture files are plain concatenated ICSP frames.
std::vector<wire::Message> read_capture(const std::filesystem::path& path);

// Writes session.json (kind, chain, truth, params summary), timing.json and
// one report_<n>.json per REPORT into dir. Capture files are written by
// run_client when requested in the options.
void write_run_dir(const std::filesystem::path& dir, const Session& session, const RunResult& result,
                   const PhantomParams& params);

}  // namespace icmr::sim
