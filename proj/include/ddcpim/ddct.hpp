#pragma once

// DDCT tensor files: "DDCT", u8 version, u8 dtype, u8 ndims, ndims x u32 dims,
// row-major payload. Everything little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "ddcpim/core.hpp"

namespace ddcpim {

enum class DType : std::uint8_t { F32 = 0, I8 = 1, I32 = 2, I16 = 3 };

inline std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::I8: return 1;
    case DType::I32: return 4;
    case DType::I16: return 2;
  }
  throw Error(ErrorKind::Format, "unknown dtype");
}

inline const char* to_string(DType t) {
  switch (t) {
    case DType::F32: return "float32";
    case DType::I8: return "int8";
    case DType::I32: return "int32";
    case DType::I16: return "int16";
  }
  return "?";
}

template <typename T> constexpr DType dtype_of();
template <> constexpr DType dtype_of<float>() { return DType::F32; }
template <> constexpr DType dtype_of<std::int8_t>() { return DType::I8; }
template <> constexpr DType dtype_of<std::int32_t>() { return DType::I32; }
template <> constexpr DType dtype_of<std::int16_t>() { return DType::I16; }

inline constexpr std::uint8_t kDdctVersion = 1;

struct DdctFile {
  DType dtype = DType::I8;
  std::vector<std::uint32_t> dims;
  std::variant<std::vector<float>, std::vector<std::int8_t>, std::vector<std::int32_t>, std::vector<std::int16_t>>
      data;

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  template <typename T>
  const std::vector<T>& values() const {
    require(dtype == dtype_of<T>(), ErrorKind::Format,
            std::string("expected ") + to_string(dtype_of<T>()) + " tensor, file holds " + to_string(dtype));
    return std::get<std::vector<T>>(data);
  }

  template <typename T, std::size_t Rank>
  Tensor<T, Rank> tensor() const {
    require(dims.size() == Rank, ErrorKind::Dimension,
            "expected rank " + std::to_string(Rank) + ", file has rank " + std::to_string(dims.size()));
    typename Tensor<T, Rank>::Shape shape{};
    for (std::size_t i = 0; i < Rank; ++i) shape[i] = dims[i];
    Tensor<T, Rank> t(shape);
    t.storage() = values<T>();
    return t;
  }

  template <typename T, std::size_t Rank>
  static DdctFile from(const Tensor<T, Rank>& t) {
    DdctFile f;
    f.dtype = dtype_of<T>();
    for (auto d : t.shape()) {
      require(d <= 0xFFFFFFFFull, ErrorKind::Range, "dimension exceeds u32");
      f.dims.push_back(static_cast<std::uint32_t>(d));
    }
    f.data = t.storage();
    return f;
  }

  template <typename T>
  static DdctFile from(std::vector<std::uint32_t> dims, std::vector<T> v) {
    DdctFile f;
    f.dtype = dtype_of<T>();
    f.dims = std::move(dims);
    require(f.count() == v.size(), ErrorKind::Dimension, "value count does not match dims");
    f.data = std::move(v);
    return f;
  }
};

namespace detail {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return v;
}

template <typename T>
using Raw = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>>;

}  // namespace detail

inline std::vector<std::uint8_t> encode(const DdctFile& f) {
  require(f.dims.size() <= 255, ErrorKind::Format, "too many dims");
  std::vector<std::uint8_t> out{'D', 'D', 'C', 'T', kDdctVersion, static_cast<std::uint8_t>(f.dtype),
                                static_cast<std::uint8_t>(f.dims.size())};
  for (auto d : f.dims) detail::put_le<std::uint32_t>(out, d);
  std::visit(
      [&](const auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        require(dtype_of<T>() == f.dtype, ErrorKind::Format, "dtype tag does not match payload");
        require(v.size() == f.count(), ErrorKind::Format, "payload length does not match dims");
        for (T x : v) detail::put_le(out, std::bit_cast<detail::Raw<T>>(x));
      },
      f.data);
  return out;
}

inline DdctFile decode(const std::vector<std::uint8_t>& bytes) {
  require(bytes.size() >= 7 && std::memcmp(bytes.data(), "DDCT", 4) == 0, ErrorKind::Format, "bad DDCT magic");
  require(bytes[4] == kDdctVersion, ErrorKind::Format, "unsupported DDCT version " + std::to_string(bytes[4]));
  require(bytes[5] <= 3, ErrorKind::Format, "unknown DDCT dtype " + std::to_string(bytes[5]));
  DdctFile f;
  f.dtype = static_cast<DType>(bytes[5]);
  const std::size_t ndims = bytes[6];
  std::size_t pos = 7;
  require(bytes.size() >= pos + 4 * ndims, ErrorKind::Format, "truncated DDCT header");
  for (std::size_t i = 0; i < ndims; ++i, pos += 4) f.dims.push_back(detail::get_le<std::uint32_t>(&bytes[pos]));
  const std::size_t n = f.count();
  const std::size_t es = dtype_size(f.dtype);
  require(bytes.size() - pos == n * es, ErrorKind::Format,
          "DDCT payload has " + std::to_string(bytes.size() - pos) + " bytes, dims need " + std::to_string(n * es));
  auto fill = [&](auto tag) {
    using T = decltype(tag);
    std::vector<T> v(n);
    for (std::size_t i = 0; i < n; ++i)
      v[i] = std::bit_cast<T>(detail::get_le<detail::Raw<T>>(&bytes[pos + i * sizeof(T)]));
    f.data = std::move(v);
  };
  switch (f.dtype) {
    case DType::F32: fill(float{}); break;
    case DType::I8: fill(std::int8_t{}); break;
    case DType::I32: fill(std::int32_t{}); break;
    case DType::I16: fill(std::int16_t{}); break;
  }
  return f;
}

inline DdctFile read_ddct(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::Format, "cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.detail());
  }
}

inline void write_ddct(const std::string& path, const DdctFile& f) {
  const auto bytes = encode(f);
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::Format, "cannot write '" + path + "'");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace ddcpim
