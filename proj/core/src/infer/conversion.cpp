#include "icmr/infer/conversion.hpp"

#include <cmath>
#include <set>

namespace icmr::infer {

std::vector<Tensor> group_to_tensors(const stages::ImageGroup& group) {
  if (group.frames.empty()) throw ConversionError("empty image group");
  const auto rows = group.frames.front().header.rows;
  const auto cols = group.frames.front().header.cols;
  const std::size_t n = group.frames.size();
  std::vector<float> pixels;
  pixels.reserve(n * rows * cols);
  std::vector<float> times;
  std::vector<std::string> metas;
  std::size_t longest = 0;
  for (const auto& f : group.frames) {
    if (f.header.rows != rows || f.header.cols != cols) {
      throw ConversionError("image group frames differ in shape (" + std::to_string(rows) + "x" +
                            std::to_string(cols) + " vs " + std::to_string(f.header.rows) + "x" +
                            std::to_string(f.header.cols) + ")");
    }
    if (f.header.data_type != wire::PixelType::kFloat) {
      throw ConversionError("image group frames must be float magnitude images");
    }
    const auto& px = f.magnitude();
    pixels.insert(pixels.end(), px.begin(), px.end());
    times.push_back(f.header.trigger_time_ms);
    metas.push_back(f.meta.serialize());
    longest = std::max(longest, metas.back().size());
  }
  std::vector<std::uint8_t> meta_bytes(n * longest, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(metas[i].begin(), metas[i].end(), meta_bytes.begin() + static_cast<std::ptrdiff_t>(i * longest));
  }
  auto n32 = static_cast<std::uint32_t>(n);
  return {
      f32_tensor("frames", {n32, rows, cols}, pixels),
      f32_tensor("trigger_times", {n32}, times),
      u8_tensor("meta", {n32, static_cast<std::uint32_t>(longest)}, meta_bytes),
  };
}

namespace {

std::vector<std::string> split_names(const std::vector<std::uint8_t>& bytes) {
  std::vector<std::string> names;
  std::string current;
  for (auto b : bytes) {
    if (b == ',') {
      names.push_back(current);
      current.clear();
    } else {
      current.push_back(static_cast<char>(b));
    }
  }
  if (!current.empty() || !names.empty()) names.push_back(current);
  return names;
}

void require(bool condition, const std::string& what) {
  if (!condition) throw ConversionError(what);
}

}  // namespace

ModelArtifacts artifacts_from_tensors(const std::vector<Tensor>& tensors,
                                      const stages::ImageGroup& group) {
  static const std::set<std::string> echoed = {"frames", "trigger_times", "meta"};
  const Tensor* mask = nullptr;
  const Tensor* landmarks = nullptr;
  const Tensor* names = nullptr;
  for (const auto& t : tensors) {
    require(t.consistent(), "tensor '" + t.name + "' is malformed");
    if (t.name == "mask") {
      mask = &t;
    } else if (t.name == "landmarks") {
      landmarks = &t;
    } else if (t.name == "landmark_names") {
      names = &t;
    } else if (!echoed.contains(t.name)) {
      throw ConversionError("unknown model output tensor '" + t.name + "'");
    }
  }

  const std::size_t n = group.frames.size();
  ModelArtifacts out;
  if (mask) {
    require(mask->dtype == DType::kU8, "mask tensor must be u8");
    require(mask->dims.size() == 3 && mask->dims[0] == n, "mask tensor must be [N, rows, cols]");
    auto labels = mask->values<std::uint8_t>();
    const std::size_t plane = std::size_t(mask->dims[1]) * mask->dims[2];
    for (std::size_t i = 0; i < n; ++i) {
      const auto& h = group.frames[i].header;
      require(mask->dims[1] == h.rows && mask->dims[2] == h.cols,
              "mask tensor grid does not match frame " + std::to_string(i));
      cmr::SegmentationMask m;
      m.header = h;
      m.header.data_type = wire::PixelType::kLabel;
      m.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(i * plane),
                      labels.begin() + static_cast<std::ptrdiff_t>((i + 1) * plane));
      for (auto code : m.labels) require(code <= cmr::label::kRvBlood, "mask label code out of range");
      out.masks.push_back(std::move(m));
    }
  }
  if (landmarks) {
    require(landmarks->dtype == DType::kF32, "landmarks tensor must be f32");
    require(landmarks->dims.size() == 3 && landmarks->dims[0] == n && landmarks->dims[2] == 2,
            "landmarks tensor must be [N, K, 2]");
    require(names != nullptr && names->dtype == DType::kU8,
            "landmarks tensor needs a u8 landmark_names tensor");
    auto point_names = split_names(names->data);
    const std::size_t k = landmarks->dims[1];
    require(point_names.size() == k, "landmark_names has " + std::to_string(point_names.size()) +
                                         " names for " + std::to_string(k) + " points");
    auto coords = landmarks->values<float>();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& frame = group.frames[i];
      cmr::LandmarkSet set;
      auto view_text = frame.meta.get("view").value_or("CH4");
      auto view = cmr::parse_view(view_text);
      require(view.has_value(), "frame meta has unknown view '" + view_text + "'");
      set.view = *view;
      set.phase_idx = frame.header.phase_idx;
      set.trigger_time_ms = frame.header.trigger_time_ms;
      for (std::size_t j = 0; j < k; ++j) {
        float r = coords[(i * k + j) * 2];
        float c = coords[(i * k + j) * 2 + 1];
        if (std::isnan(r) || std::isnan(c)) continue;
        set.points[point_names[j]] = {r, c};
      }
      out.landmarks.push_back(std::move(set));
    }
  }
  return out;
}

Tensor masks_to_tensor(const std::vector<cmr::SegmentationMask>& masks) {
  if (masks.empty()) throw ConversionError("no masks");
  const auto rows = masks.front().header.rows;
  const auto cols = masks.front().header.cols;
  std::vector<std::uint8_t> data;
  data.reserve(masks.size() * rows * cols);
  for (const auto& m : masks) {
    require(m.header.rows == rows && m.header.cols == cols, "masks differ in shape");
    for (auto code : m.labels) data.push_back(static_cast<std::uint8_t>(code));
  }
  return u8_tensor("mask", {static_cast<std::uint32_t>(masks.size()), rows, cols}, data);
}

}  // namespace icmr::infer
