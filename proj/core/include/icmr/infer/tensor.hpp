#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "icmr/wire/bytes.hpp"

namespace icmr::infer {

static_assert(std::endian::native == std::endian::little,
              "tensor payloads are stored as little-endian host bytes");

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2, kU8 = 3, kI32 = 4 };

std::size_t dtype_width(DType dtype);
const char* dtype_name(DType dtype);

// Named n-d array, row-major, data held as little-endian bytes.
struct Tensor {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t element_count() const;
  // data.size() == dtype width * element count
  bool consistent() const;

  template <typename T>
  static Tensor make(std::string name, DType dtype, std::vector<std::uint32_t> dims,
                     std::span<const T> values) {
    Tensor t{std::move(name), dtype, std::move(dims), {}};
    t.data.resize(values.size_bytes());
    if (!values.empty()) std::memcpy(t.data.data(), values.data(), values.size_bytes());
    return t;
  }

  template <typename T>
  std::vector<T> values() const {
    std::vector<T> out(data.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), data.data(), out.size() * sizeof(T));
    return out;
  }

  bool operator==(const Tensor&) const = default;
};

Tensor f32_tensor(std::string name, std::vector<std::uint32_t> dims, std::span<const float> values);
Tensor u8_tensor(std::string name, std::vector<std::uint32_t> dims,
                 std::span<const std::uint8_t> values);

// name_len u16, name, dtype u8, ndim u8, dims u32[ndim], data.
void encode_tensor(wire::ByteWriter& w, const Tensor& tensor);
// Throws std::invalid_argument on inconsistent shapes, wire::ShortRead on
// truncation.
Tensor decode_tensor(wire::ByteReader& r);

}  // namespace icmr::infer
