#include "icmr/infer/stub_worker.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <thread>

#include "icmr/cmr/types.hpp"
#include "icmr/infer/worker_protocol.hpp"
#include "icmr/wire/meta.hpp"

namespace icmr::infer {

namespace {

class Log {
 public:
  explicit Log(const std::string& path) {
    if (!path.empty()) file_ = std::fopen(path.c_str(), "a");
  }
  ~Log() {
    if (file_) std::fclose(file_);
  }
  void line(const std::string& text) {
    if (!file_) return;
    std::fprintf(file_, "%d %s\n", static_cast<int>(::getpid()), text.c_str());
    std::fflush(file_);
  }

 private:
  std::FILE* file_ = nullptr;
};

bool write_fully(int fd, const wire::Bytes& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t n = ::write(fd, bytes.data() + sent, bytes.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

const Tensor& find_tensor(const std::vector<Tensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw std::runtime_error("input tensor '" + name + "' missing");
}

std::vector<wire::MetaAttributes> frame_metas(const std::vector<Tensor>& inputs) {
  const auto& meta = find_tensor(inputs, "meta");
  if (meta.dtype != DType::kU8 || meta.dims.size() != 2) {
    throw std::runtime_error("meta tensor must be u8 [N, L]");
  }
  std::vector<wire::MetaAttributes> out;
  const std::size_t width = meta.dims[1];
  for (std::size_t i = 0; i < meta.dims[0]; ++i) {
    const char* row = reinterpret_cast<const char*>(meta.data.data() + i * width);
    std::size_t len = 0;
    while (len < width && row[len] != '\0') ++len;
    out.push_back(wire::MetaAttributes::parse(std::string_view(row, len)));
  }
  return out;
}

struct Model {
  std::string id;
  std::map<std::string, std::string> params;

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : std::stod(it->second);
  }

  std::vector<Tensor> segment(const std::vector<Tensor>& inputs) const {
    const auto& frames = find_tensor(inputs, "frames");
    if (frames.dtype != DType::kF32 || frames.dims.size() != 3) {
      throw std::runtime_error("frames tensor must be f32 [N, rows, cols]");
    }
    auto metas = frame_metas(inputs);
    const std::size_t n = frames.dims[0];
    const std::size_t plane = std::size_t(frames.dims[1]) * frames.dims[2];
    if (metas.size() != n) throw std::runtime_error("meta rows do not match frame count");
    const std::array<double, 4> levels = {
        param("level.background", 0.1), param("level.lv_blood", 1.0),
        param("level.myocardium", 0.35), param("level.rv_blood", 0.8)};

    auto pixels = frames.values<float>();
    std::vector<std::uint8_t> mask(n * plane, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (auto gt = metas[i].get("gt_mask")) {
        auto labels = cmr::decode_labels_rle(*gt, plane);
        for (std::size_t p = 0; p < plane; ++p) mask[i * plane + p] = static_cast<std::uint8_t>(labels[p]);
        continue;
      }
      for (std::size_t p = 0; p < plane; ++p) {
        double v = pixels[i * plane + p];
        std::size_t best = 0;
        double best_err = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < levels.size(); ++k) {
          double err = std::abs(v - levels[k]);
          if (err < best_err) {
            best_err = err;
            best = k;
          }
        }
        mask[i * plane + p] = static_cast<std::uint8_t>(best);
      }
    }
    return {u8_tensor("mask", {static_cast<std::uint32_t>(n), frames.dims[1], frames.dims[2]}, mask)};
  }

  std::vector<Tensor> landmarks(const std::vector<Tensor>& inputs) const {
    auto metas = frame_metas(inputs);
    std::vector<std::string> names;
    for (const auto& m : metas) {
      for (const auto& entry : m.get_all("gt_landmark")) {
        auto name = cmr::parse_landmark_entry(entry).first;
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
      }
    }
    const std::size_t n = metas.size();
    const std::size_t k = names.size();
    std::vector<float> coords(n * k * 2, std::numeric_limits<float>::quiet_NaN());
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& entry : metas[i].get_all("gt_landmark")) {
        auto [name, p] = cmr::parse_landmark_entry(entry);
        auto j = static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
        coords[(i * k + j) * 2] = static_cast<float>(p.row);
        coords[(i * k + j) * 2 + 1] = static_cast<float>(p.col);
      }
    }
    std::string joined;
    for (const auto& name : names) joined += (joined.empty() ? "" : ",") + name;
    std::vector<std::uint8_t> name_bytes(joined.begin(), joined.end());
    return {f32_tensor("landmarks",
                       {static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(k), 2}, coords),
            u8_tensor("landmark_names", {static_cast<std::uint32_t>(name_bytes.size())}, name_bytes)};
  }

  std::vector<Tensor> run(const std::vector<Tensor>& inputs) const {
    if (id == "identity") return inputs;
    if (id == "oracle_segmenter") return segment(inputs);
    if (id == "oracle_landmarks") return landmarks(inputs);
    if (id == "sleep") {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(param("sleep_ms", 100))));
      return inputs;
    }
    if (id == "crash") {
      std::fflush(nullptr);
      ::_exit(3);
    }
    throw std::runtime_error("no model loaded");
  }
};

bool known_model(const std::string& id) {
  return id == "identity" || id == "oracle_segmenter" || id == "oracle_landmarks" ||
         id == "crash" || id == "sleep";
}

}  // namespace

int run_stub_worker(int in_fd, int out_fd, const StubWorkerOptions& options) {
  Log log(options.log_path);
  WorkerFrameDecoder decoder;
  std::optional<Model> model;
  std::array<std::uint8_t, 64 * 1024> chunk{};

  for (;;) {
    std::optional<WorkerMessage> message;
    try {
      message = decoder.next();
    } catch (const WorkerProtocolError& e) {
      log.line(std::string("MALFORMED ") + e.what());
      return 2;
    }
    if (!message) {
      ssize_t n = ::read(in_fd, chunk.data(), chunk.size());
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        log.line("EOF");
        return 0;
      }
      decoder.feed(wire::ByteView(chunk.data(), static_cast<std::size_t>(n)));
      continue;
    }

    WorkerMessage reply;
    if (auto* load = std::get_if<LoadRequest>(&*message)) {
      log.line("LOAD " + load->model_id + " " + load->device);
      LoadAck ack;
      if (model) {
        ack = {false, "a model is already loaded"};
      } else if (load->device != "cpu") {
        ack = {false, "device unsupported: " + load->device};
      } else if (!known_model(load->model_id)) {
        ack = {false, "unknown model '" + load->model_id + "'"};
      } else {
        model = Model{load->model_id, load->params};
        ack = {true, "loaded " + load->model_id};
      }
      reply = ack;
    } else if (auto* infer = std::get_if<InferRequest>(&*message)) {
      log.line("INFER " + std::to_string(infer->request_id));
      InferResult result;
      result.request_id = infer->request_id;
      if (!model) {
        result.ok = false;
        result.error = "INFER before LOAD";
      } else {
        try {
          result.tensors = model->run(infer->tensors);
          result.ok = true;
        } catch (const std::exception& e) {
          result.ok = false;
          result.error = e.what();
        }
      }
      reply = std::move(result);
    } else if (std::holds_alternative<ShutdownRequest>(*message)) {
      log.line("SHUTDOWN");
      return 0;
    } else {
      log.line("UNEXPECTED");
      return 2;
    }
    if (!write_fully(out_fd, encode_worker_message(reply))) return 0;
  }
}

}  // namespace icmr::infer
