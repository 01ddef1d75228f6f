#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <random>

#include "icmr/infer/conversion.hpp"
#include "icmr/infer/worker_client.hpp"
#include "icmr/infer/worker_protocol.hpp"
#include "icmr/sim/phantom.hpp"
#include "test_util.hpp"

using namespace icmr;
using namespace icmr::infer;
using namespace std::chrono_literals;

namespace {

ModelSpec spec(const std::string& model, Device device = Device::kCpu) {
  ModelSpec s;
  s.model_id = model;
  s.device = device;
  s.worker_cmd = ICMR_STUB_WORKER;
  s.load_timeout = 10s;
  return s;
}

bool process_exists(pid_t pid) {
  return std::filesystem::exists("/proc/" + std::to_string(pid));
}

Tensor random_tensor(std::mt19937& rng, const std::string& name) {
  std::uniform_int_distribution<int> dim(1, 5), kind(0, 3), byte(0, 255);
  std::vector<std::uint32_t> dims(static_cast<std::size_t>(dim(rng) - 1));
  std::size_t n = 1;
  for (auto& d : dims) n *= (d = static_cast<std::uint32_t>(dim(rng)));
  const DType types[] = {DType::kF32, DType::kF64, DType::kU8, DType::kI32};
  Tensor t{name, types[kind(rng)], dims, {}};
  t.data.resize(n * dtype_width(t.dtype));
  for (auto& b : t.data) b = static_cast<std::uint8_t>(byte(rng));
  return t;
}

stages::ImageGroup group_of(const std::vector<wire::ImageFrame>& frames) {
  stages::ImageGroup g;
  g.frames = frames;
  g.complete = true;
  return g;
}

}  // namespace

TEST(TensorCodec, RoundTripRandomTensors) {
  std::mt19937 rng(2);
  for (int i = 0; i < 500; ++i) {
    Tensor t = random_tensor(rng, "t" + std::to_string(i));
    ASSERT_TRUE(t.consistent());
    wire::Bytes bytes;
    wire::ByteWriter w(bytes);
    encode_tensor(w, t);
    wire::ByteReader r(bytes);
    EXPECT_EQ(decode_tensor(r), t);
    EXPECT_TRUE(r.exhausted());
  }
}

TEST(TensorCodec, RejectsInconsistentShape) {
  Tensor t{"x", DType::kF32, {2, 2}, std::vector<std::uint8_t>(12)};
  EXPECT_FALSE(t.consistent());
  wire::Bytes bytes;
  wire::ByteWriter w(bytes);
  w.u16(1);
  w.text("x");
  w.u8(1);
  w.u8(1);
  w.u32(4);
  w.bytes(std::vector<std::uint8_t>(8));
  wire::ByteReader r(bytes);
  EXPECT_ANY_THROW(decode_tensor(r));
}

TEST(WorkerProtocol, MessagesRoundTripWithChunking) {
  std::mt19937 rng(4);
  std::vector<WorkerMessage> sent{
      LoadRequest{"identity", "cpu", {{"a", "1"}, {"b", "two"}}},
      LoadAck{false, "device unsupported: gpu"},
      InferRequest{7, {random_tensor(rng, "frames"), random_tensor(rng, "meta")}},
      InferResult{7, true, "", {random_tensor(rng, "mask")}},
      InferResult{8, false, "bad", {}},
      ShutdownRequest{},
  };
  wire::Bytes all;
  for (const auto& m : sent) {
    auto b = encode_worker_message(m);
    all.insert(all.end(), b.begin(), b.end());
  }
  WorkerFrameDecoder decoder;
  std::vector<WorkerMessage> got;
  for (std::size_t pos = 0; pos < all.size(); pos += 3) {
    decoder.feed(wire::ByteView(all.data() + pos, std::min<std::size_t>(3, all.size() - pos)));
    while (auto m = decoder.next()) got.push_back(std::move(*m));
  }
  EXPECT_EQ(got, sent);
}

TEST(WorkerProtocol, UnknownIdIsAnError) {
  wire::Bytes bytes{2, 0, 0, 0, 9, 0};
  WorkerFrameDecoder decoder;
  decoder.feed(bytes);
  EXPECT_THROW(decoder.next(), WorkerProtocolError);
}

TEST(StubWorker, IdentityIsBitExact) {
  std::mt19937 rng(8);
  auto client = WorkerClient::launch(spec("identity"));
  const pid_t pid = client->pid();
  ASSERT_GT(pid, 0);
  auto handle = client->load(spec("identity"));
  for (int i = 0; i < 20; ++i) {
    std::vector<Tensor> inputs;
    for (int k = 0; k < 3; ++k) inputs.push_back(random_tensor(rng, "in" + std::to_string(k)));
    // NaN payloads and odd bit patterns must survive untouched.
    float nan = std::numeric_limits<float>::quiet_NaN();
    std::vector<float> special{nan, -0.0f, std::numeric_limits<float>::infinity(), 1e-42f};
    inputs.push_back(f32_tensor("special", {4}, special));
    auto outputs = client->infer(handle, inputs, 10s);
    ASSERT_EQ(outputs, inputs);
  }
  EXPECT_EQ(client->infers_sent(), 20u);
  client->shutdown();
  EXPECT_FALSE(process_exists(pid));
}

TEST(StubWorker, OracleSegmenterReturnsGroundTruth) {
  sim::PhantomParams p;
  p.n_phases = 4;
  p.n_slices = 3;
  std::vector<wire::ImageFrame> frames;
  std::vector<cmr::SegmentationMask> truth;
  for (std::uint16_t ph = 0; ph < 4; ++ph) {
    auto mask = sim::sax_mask(p, 1, ph);
    wire::ImageFrame f;
    f.header = mask.header;
    f.header.data_type = wire::PixelType::kFloat;
    f.header.phase_idx = ph;
    std::vector<float> px(mask.labels.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = sim::kLabelIntensity[mask.labels[i]];
    f.pixels = px;
    // Half the frames carry explicit ground truth, the rest rely on levels.
    if (ph % 2 == 0) f.meta.add("gt_mask", cmr::encode_labels_rle(mask.labels));
    frames.push_back(f);
    truth.push_back(mask);
  }
  auto group = group_of(frames);
  auto client = WorkerClient::launch(spec("oracle_segmenter"));
  auto handle = client->load(spec("oracle_segmenter"));
  auto artifacts = artifacts_from_tensors(client->infer(handle, group_to_tensors(group), 30s), group);
  client->shutdown();
  ASSERT_EQ(artifacts.masks.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(artifacts.masks[i].labels, truth[i].labels) << i;
    EXPECT_EQ(artifacts.masks[i].header.phase_idx, i);
  }
}

TEST(StubWorker, OracleLandmarksFromMeta) {
  std::vector<wire::ImageFrame> frames(2);
  for (std::uint16_t i = 0; i < 2; ++i) {
    auto& f = frames[i];
    f.header.rows = 4;
    f.header.cols = 4;
    f.header.phase_idx = i;
    f.pixels = std::vector<float>(16, 0.5f);
    f.meta.add("view", "CH2");
    f.meta.add("gt_landmark", cmr::format_landmark_entry("apex", {1.5 + i, 2.0}));
    if (i == 1) f.meta.add("gt_landmark", cmr::format_landmark_entry("mv1", {3.0, 0.25}));
  }
  auto group = group_of(frames);
  auto client = WorkerClient::launch(spec("oracle_landmarks"));
  auto handle = client->load(spec("oracle_landmarks"));
  auto artifacts = artifacts_from_tensors(client->infer(handle, group_to_tensors(group), 30s), group);
  client->shutdown();
  ASSERT_EQ(artifacts.landmarks.size(), 2u);
  EXPECT_EQ(artifacts.landmarks[0].view, cmr::View::kCh2);
  EXPECT_EQ(artifacts.landmarks[0].points.size(), 1u);
  EXPECT_DOUBLE_EQ(artifacts.landmarks[0].points.at("apex").row, 1.5);
  EXPECT_DOUBLE_EQ(artifacts.landmarks[1].points.at("apex").row, 2.5);
  EXPECT_DOUBLE_EQ(artifacts.landmarks[1].points.at("mv1").col, 0.25);
}

TEST(StubWorker, RefusesGpuAndUnknownModels) {
  auto client = WorkerClient::launch(spec("identity", Device::kGpu));
  try {
    client->load(spec("identity", Device::kGpu));
    FAIL();
  } catch (const WorkerError& e) {
    EXPECT_NE(std::string(e.what()).find("device"), std::string::npos) << e.what();
  }
  client->shutdown();

  client = WorkerClient::launch(spec("resnet9000"));
  try {
    client->load(spec("resnet9000"));
    FAIL();
  } catch (const WorkerError& e) {
    EXPECT_NE(std::string(e.what()).find("resnet9000"), std::string::npos) << e.what();
  }
  client->shutdown();
}

TEST(StubWorker, CrashIsReportedAndReaped) {
  auto client = WorkerClient::launch(spec("crash"));
  const pid_t pid = client->pid();
  auto handle = client->load(spec("crash"));
  try {
    client->infer(handle, {f32_tensor("x", {1}, std::vector<float>{1.0f})}, 10s);
    FAIL();
  } catch (const WorkerError& e) {
    EXPECT_NE(std::string(e.what()).find("status 3"), std::string::npos) << e.what();
  }
  client->shutdown();
  EXPECT_FALSE(process_exists(pid));
}

TEST(StubWorker, TimeoutThenKill) {
  auto s = spec("sleep");
  s.params["sleep_ms"] = "5000";
  auto client = WorkerClient::launch(s);
  const pid_t pid = client->pid();
  auto handle = client->load(s);
  auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(client->infer(handle, {}, 200ms), WorkerError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 2s);
  client->shutdown(100ms);
  EXPECT_FALSE(process_exists(pid));
  EXPECT_THROW(client->infer(handle, {}, 200ms), WorkerError);
}

TEST(StubWorker, HandleFromAnotherWorkerIsRejected) {
  auto a = WorkerClient::launch(spec("identity"));
  auto b = WorkerClient::launch(spec("identity"));
  auto ha = a->load(spec("identity"));
  b->load(spec("identity"));
  EXPECT_THROW(b->infer(ha, {}, 1s), WorkerError);
  EXPECT_THROW(a->load(spec("identity")), WorkerError);
  a->shutdown();
  b->shutdown();
}

TEST(StubWorker, BadLaunchCommand) {
  auto s = spec("identity");
  s.worker_cmd = "/nonexistent/worker-binary";
  EXPECT_THROW(
      {
        auto c = WorkerClient::launch(s);
        c->load(s);
      },
      WorkerError);
}

TEST(Conversion, GroupToTensorsShapes) {
  std::vector<wire::ImageFrame> frames(3);
  for (std::size_t i = 0; i < 3; ++i) {
    frames[i].header.rows = 2;
    frames[i].header.cols = 3;
    frames[i].header.trigger_time_ms = 10.0f * float(i);
    frames[i].pixels = std::vector<float>(6, float(i));
    frames[i].meta.add("k", std::string(i + 1, 'x'));
  }
  auto tensors = group_to_tensors(group_of(frames));
  ASSERT_EQ(tensors.size(), 3u);
  EXPECT_EQ(tensors[0].name, "frames");
  EXPECT_EQ(tensors[0].dims, (std::vector<std::uint32_t>{3, 2, 3}));
  EXPECT_EQ(tensors[0].values<float>()[6], 1.0f);
  EXPECT_EQ(tensors[1].name, "trigger_times");
  EXPECT_EQ(tensors[1].values<float>(), (std::vector<float>{0.0f, 10.0f, 20.0f}));
  EXPECT_EQ(tensors[2].name, "meta");
  EXPECT_EQ(tensors[2].dims, (std::vector<std::uint32_t>{3, 6}));  // "k=xxx\n"

  frames[1].header.cols = 2;
  frames[1].pixels = std::vector<float>(4);
  EXPECT_THROW(group_to_tensors(group_of(frames)), ConversionError);
}

TEST(Conversion, MaskTensorRoundTripAndUnknownOutputs) {
  std::vector<wire::ImageFrame> frames(2);
  std::vector<cmr::SegmentationMask> masks(2);
  for (std::size_t i = 0; i < 2; ++i) {
    frames[i].header.rows = 2;
    frames[i].header.cols = 2;
    frames[i].header.slice_idx = static_cast<std::uint16_t>(5 + i);
    frames[i].pixels = std::vector<float>(4);
    masks[i].header = frames[i].header;
    masks[i].labels = {0, 1, 2, static_cast<std::uint16_t>(3 - i)};
  }
  auto group = group_of(frames);
  auto artifacts = artifacts_from_tensors({masks_to_tensor(masks)}, group);
  ASSERT_EQ(artifacts.masks.size(), 2u);
  EXPECT_EQ(artifacts.masks[1].labels, masks[1].labels);
  EXPECT_EQ(artifacts.masks[1].header.slice_idx, 6);
  EXPECT_THROW(artifacts_from_tensors({f32_tensor("logits", {1}, std::vector<float>{0})}, group),
               ConversionError);
}
