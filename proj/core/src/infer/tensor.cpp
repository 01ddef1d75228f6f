#include "icmr/infer/tensor.hpp"

#include <stdexcept>

namespace icmr::infer {

std::size_t dtype_width(DType dtype) {
  switch (dtype) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kU8: return 1;
    case DType::kI32: return 4;
  }
  return 0;
}

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kF32: return "f32";
    case DType::kF64: return "f64";
    case DType::kU8: return "u8";
    case DType::kI32: return "i32";
  }
  return "?";
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

bool Tensor::consistent() const {
  return dtype_width(dtype) != 0 && data.size() == dtype_width(dtype) * element_count();
}

Tensor f32_tensor(std::string name, std::vector<std::uint32_t> dims, std::span<const float> values) {
  return Tensor::make<float>(std::move(name), DType::kF32, std::move(dims), values);
}

Tensor u8_tensor(std::string name, std::vector<std::uint32_t> dims,
                 std::span<const std::uint8_t> values) {
  return Tensor::make<std::uint8_t>(std::move(name), DType::kU8, std::move(dims), values);
}

void encode_tensor(wire::ByteWriter& w, const Tensor& t) {
  if (t.name.size() > 0xFFFF) throw std::invalid_argument("tensor name too long");
  if (t.dims.size() > 0xFF) throw std::invalid_argument("tensor has too many dims");
  if (!t.consistent()) {
    throw std::invalid_argument("tensor '" + t.name + "' data size does not match dims");
  }
  w.u16(static_cast<std::uint16_t>(t.name.size()));
  w.text(t.name);
  w.u8(static_cast<std::uint8_t>(t.dtype));
  w.u8(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) w.u32(d);
  w.bytes(t.data);
}

Tensor decode_tensor(wire::ByteReader& r) {
  Tensor t;
  t.name = r.text(r.u16());
  auto dtype = r.u8();
  if (dtype < 1 || dtype > 4) {
    throw std::invalid_argument("tensor '" + t.name + "' has unknown dtype " + std::to_string(dtype));
  }
  t.dtype = static_cast<DType>(dtype);
  auto ndim = r.u8();
  t.dims.resize(ndim);
  for (auto& d : t.dims) d = r.u32();
  std::size_t bytes = dtype_width(t.dtype) * t.element_count();
  if (bytes > r.remaining()) {
    throw std::invalid_argument("tensor '" + t.name + "' declares " + std::to_string(bytes) +
                                " bytes, only " + std::to_string(r.remaining()) + " remain");
  }
  auto view = r.take(bytes);
  t.data.assign(view.begin(), view.end());
  return t;
}

}  // namespace icmr::infer
