#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "icmr/sim/client.hpp"
#include "icmr/sim/phantom.hpp"
#include "icmr/sim/verify.hpp"

namespace fs = std::filesystem;
using namespace icmr;

namespace {

std::string default_endpoint() {
  const char* env = std::getenv("ICSP_PORT");
  return std::string("127.0.0.1:") + (env ? env : "9122");
}

int do_run(const std::string& kind_text, const std::string& endpoint, sim::PhantomParams params,
           double pacing_scale, const fs::path& out, bool capture, const std::string& tol_file) {
  const auto kind = sim::parse_session_kind(kind_text);
  spdlog::info("generating {} session (seed {})", kind_text, params.seed);
  const auto session = sim::generate_session(kind, params);

  sim::ClientOptions options;
  options.pacing = pacing_scale > 0.0;
  options.pacing_scale = pacing_scale;
  fs::create_directories(out);
  if (capture) options.capture_sent = out / "capture_sent.icsp";
  options.capture_received = out / "capture_received.icsp";

  spdlog::info("sending {} messages to {}", session.messages.size(), endpoint);
  auto result = sim::run_client(wire::Endpoint::parse(endpoint), session, options);
  sim::write_run_dir(out, session, result, params);
  const auto& t = result.timing;
  std::cout << "received " << result.received.size() << " messages, " << result.reports().size()
            << " reports\n";
  if (auto v = t.first_image_ms()) std::cout << "first image at " << *v << " ms\n";
  if (auto v = t.last_acquisition_ms()) std::cout << "last acquisition at " << *v << " ms\n";
  if (auto v = t.post_acquisition_ms()) std::cout << "completed " << *v << " ms after acquisition\n";
  if (!result.ok()) {
    std::cerr << "inline-sim: " << *result.error << "\n";
    return 1;
  }
  if (tol_file.empty()) return 0;
  auto verdict = sim::verify_run(out, sim::Tolerances::load(tol_file));
  std::cout << verdict.summary();
  return verdict.pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  CLI::App app{"inline-sim: scanner simulator and verification harness"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // run
  auto* run = app.add_subcommand("run", "generate a session, stream it and record the results");
  sim::PhantomParams params;
  std::string kind = "sax", endpoint = default_endpoint(), out = "run", tol_file;
  double pacing_scale = 1.0;
  bool no_capture = false;
  run->add_option("--kind", kind, "sax, lax, perf_rest or perf_stress")
      ->check(CLI::IsMember({"sax", "lax", "perf_rest", "perf_stress"}));
  run->add_option("--endpoint", endpoint, "server host:port");
  run->add_option("--seed", params.seed, "phantom seed");
  run->add_option("--pacing-scale", pacing_scale, "multiplies all pacing delays; 0 sends unpaced")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--out", out, "run directory");
  run->add_option("--chain", params.chain, "server chain name (default per kind)");
  run->add_option("--patient-key", params.patient_key, "links scans of one subject");
  run->add_option("--slice-ms", params.slice_ms, "acquisition time per SAX slice");
  run->add_option("--gap-ms", params.gap_ms, "pause between SAX slices");
  run->add_option("--frame-ms", params.frame_ms, "pause between LAX/perfusion frames");
  run->add_option("--slices", params.n_slices, "SAX slices");
  run->add_option("--phases", params.n_phases, "cardiac phases");
  run->add_option("--matrix", params.matrix, "SAX/LAX matrix size");
  run->add_option("--coils", params.n_coils, "receive coils");
  run->add_option("--noise", params.noise_sigma, "k-space noise sigma");
  run->add_option("--heart-rate", params.heart_rate_bpm, "bpm");
  run->add_option("--bsa", params.bsa_m2, "body surface area, m^2");
  run->add_flag("--identical-stress", params.identical_stress, "perf_stress flows equal rest flows");
  run->add_flag("--no-capture", no_capture, "do not write capture_sent.icsp");
  run->add_option("--tol-file", tol_file, "verify right after the run with these tolerances");

  // verify
  auto* verify = app.add_subcommand("verify", "check a run directory against its ground truth");
  std::string run_dir, verify_tol;
  bool no_render = false;
  verify->add_option("--run", run_dir, "run directory")->required();
  verify->add_option("--tol-file", verify_tol, "tolerance file (key = value)");
  verify->add_flag("--no-render", no_render, "skip PNG output");

  // replay
  auto* replay = app.add_subcommand("replay", "send a captured stream again, unpaced");
  std::string capture_file, replay_out = "replay";
  replay->add_option("--capture", capture_file, "capture_sent.icsp of an earlier run")->required();
  replay->add_option("--endpoint", endpoint, "server host:port");
  replay->add_option("--out", replay_out, "directory for the received capture and reports");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run) return do_run(kind, endpoint, params, pacing_scale, out, !no_capture, tol_file);
    if (*verify) {
      auto tol = verify_tol.empty() ? sim::Tolerances::defaults() : sim::Tolerances::load(verify_tol);
      sim::VerifyOptions options;
      options.render = !no_render;
      auto verdict = sim::verify_run(run_dir, tol, options);
      std::cout << verdict.summary();
      return verdict.pass() ? 0 : 2;
    }
    if (*replay) {
      auto messages = sim::read_capture(capture_file);
      fs::create_directories(replay_out);
      sim::ClientOptions options;
      options.pacing = false;
      options.capture_received = fs::path(replay_out) / "capture_received.icsp";
      auto transport = wire::connect_tcp(wire::Endpoint::parse(endpoint));
      auto result = sim::run_client(*transport, messages, {}, options);
      std::size_t k = 0;
      for (const auto* r : result.reports()) {
        std::ofstream(fs::path(replay_out) / ("report_" + std::to_string(k++) + ".json")) << r->document << '\n';
      }
      std::cout << "replayed " << messages.size() << " messages, received " << result.received.size() << "\n";
      if (!result.ok()) {
        std::cerr << "inline-sim: " << *result.error << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "inline-sim: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
