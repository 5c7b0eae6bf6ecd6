#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ddcpim {

enum class ErrorKind {
  Pairing,       // odd filter count where pairs are required
  Dimension,     // empty or inconsistent shapes
  Precondition,  // input outside the documented domain
  Integrity,     // complementarity / schedule invariant broken
  Mode,          // macro operated in the wrong mode
  Config,        // feature config and schedule disagree
  Format,        // malformed file
  Range,         // index out of range
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Pairing: return "pairing";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Mode: return "mode";
    case ErrorKind::Config: return "config";
    case ErrorKind::Format: return "format";
    case ErrorKind::Range: return "range";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind), detail_(what) {}
  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

// ---------------------------------------------------------------------------
// 8-bit two's-complement helpers

inline constexpr std::uint8_t bits_of(std::int8_t v) { return static_cast<std::uint8_t>(v); }
inline constexpr std::int8_t from_bits(std::uint8_t b) { return static_cast<std::int8_t>(b); }

inline constexpr std::int8_t bitwise_not8(std::int8_t v) {
  return from_bits(static_cast<std::uint8_t>(~bits_of(v)));
}

// Wraps an integer to its low 8 bits, read back as two's complement.
inline constexpr std::int8_t wrap8(int v) { return from_bits(static_cast<std::uint8_t>(v & 0xFF)); }

inline constexpr bool fits_int8(int v) { return v >= -128 && v <= 127; }

// Round half away from zero, returned as integer.
inline long long round_half_away(double x) { return std::llround(x); }

// Round half to even (banker's rounding), returned as integer.
inline long long round_half_even(double x) {
  const double f = std::floor(x);
  const double diff = x - f;
  long long r = static_cast<long long>(f);
  if (diff > 0.5) return r + 1;
  if (diff < 0.5) return r;
  return (r % 2 == 0) ? r : r + 1;
}

// Integer division of num by den (den > 0) rounded half away from zero.
inline long long div_round_half_away(long long num, long long den) {
  const long long q = (std::llabs(num) * 2 + den) / (2 * den);
  return num < 0 ? -q : q;
}

// ---------------------------------------------------------------------------
// Dense row-major tensors

template <typename T, std::size_t Rank>
class Tensor {
 public:
  using value_type = T;
  using Shape = std::array<std::size_t, Rank>;

  Tensor() { shape_.fill(0); }
  explicit Tensor(const Shape& shape, T fill = T{}) : shape_(shape), data_(count(shape), fill) {}

  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  template <typename... I>
  T& operator()(I... idx) {
    static_assert(sizeof...(I) == Rank);
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const T& operator()(I... idx) const {
    static_assert(sizeof...(I) == Rank);
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  std::size_t offset(const Shape& idx) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < Rank; ++i) off = off * shape_[i] + idx[i];
    return off;
  }

  Shape unravel(std::size_t off) const {
    Shape idx{};
    for (std::size_t i = Rank; i-- > 0;) {
      idx[i] = off % shape_[i];
      off /= shape_[i];
    }
    return idx;
  }

  static std::size_t count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace ddcpim
