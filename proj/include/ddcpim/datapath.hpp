#pragma once

// Pre-process (im2col, bit-serial conversion) and merge unit (shift & add,
// accumulate-and-recover).

#include <array>
#include <span>
#include <vector>

#include "ddcpim/core.hpp"
#include "ddcpim/fcc.hpp"
#include "ddcpim/oracle.hpp"

namespace ddcpim {

// Receptive-field vectors. For std/pw/fc there is one vector per output
// position (length K*K*C, channel-major then row-major, matching the weight
// layout). For dw there is one vector per (channel, position), length K*K.
class Im2Col {
 public:
  Im2Col(std::size_t groups, std::size_t positions, std::size_t length)
      : groups_(groups), positions_(positions), length_(length), data_(groups * positions * length, 0) {}

  std::size_t groups() const { return groups_; }
  std::size_t positions() const { return positions_; }
  std::size_t length() const { return length_; }

  std::span<std::int8_t> vector(std::size_t position, std::size_t group = 0) {
    return {data_.data() + (group * positions_ + position) * length_, length_};
  }
  std::span<const std::int8_t> vector(std::size_t position, std::size_t group = 0) const {
    return {data_.data() + (group * positions_ + position) * length_, length_};
  }

 private:
  std::size_t groups_, positions_, length_;
  std::vector<std::int8_t> data_;
};

inline Im2Col im2col(const ActivationTensor& in, const LayerSpec& s) {
  validate(s);
  detail::check_input(in, s);
  const bool dw = s.kind == LayerKind::Dw;
  Im2Col cols(dw ? s.C : 1, s.positions(), s.depth());
  const long pad = static_cast<long>(s.pad);
  for (std::size_t g = 0; g < cols.groups(); ++g)
    for (std::size_t oy = 0; oy < s.out_h(); ++oy)
      for (std::size_t ox = 0; ox < s.out_w(); ++ox) {
        auto v = cols.vector(oy * s.out_w() + ox, g);
        std::size_t e = 0;
        for (std::size_t c = dw ? g : 0; c < (dw ? g + 1 : s.C); ++c)
          for (std::size_t ky = 0; ky < s.K; ++ky)
            for (std::size_t kx = 0; kx < s.K; ++kx)
              v[e++] = static_cast<std::int8_t>(
                  detail::padded(in, c, static_cast<long>(oy * s.stride + ky) - pad,
                                 static_cast<long>(ox * s.stride + kx) - pad));
      }
  return cols;
}

// Eight bit planes of a signed 8-bit vector, bit 0 first. Plane k packs
// bit k of element e into bit e%32 of word e/32. Plane 7 carries -2^7.
struct BitSerialStream {
  std::size_t length = 0;
  std::array<std::vector<std::uint32_t>, 8> planes;

  bool bit(std::size_t k, std::size_t e) const { return (planes[k][e / 32] >> (e % 32)) & 1u; }

  // Compartment mask for 32 consecutive elements starting at word `tile`.
  std::uint32_t word(std::size_t k, std::size_t tile) const {
    return tile < planes[k].size() ? planes[k][tile] : 0u;
  }
};

inline BitSerialStream bit_serialize(std::span<const std::int8_t> v) {
  BitSerialStream s;
  s.length = v.size();
  const std::size_t words = (v.size() + 31) / 32;
  for (auto& p : s.planes) p.assign(words, 0);
  for (std::size_t e = 0; e < v.size(); ++e) {
    const std::uint8_t b = bits_of(v[e]);
    for (std::size_t k = 0; k < 8; ++k)
      if ((b >> k) & 1u) s.planes[k][e / 32] |= 1u << (e % 32);
  }
  return s;
}

// Weighted sum of the planes: recovers the signed values.
inline std::vector<int> bit_deserialize(const BitSerialStream& s) {
  std::vector<int> v(s.length, 0);
  for (std::size_t e = 0; e < s.length; ++e)
    for (std::size_t k = 0; k < 8; ++k)
      if (s.bit(k, e)) v[e] += (k == 7 ? -1 : 1) * (1 << k);
  return v;
}

// sums[k][b]: count of (input bit k AND weight bit b) products.
using BitSums = std::array<std::array<std::uint32_t, 8>, 8>;

// Psum = sum_k sum_b s[k][b] * sigma(k) * sigma(b) * 2^(k+b), sigma(7) = -1.
inline std::int32_t shift_add(const BitSums& sums) {
  std::int64_t acc = 0;
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t b = 0; b < 8; ++b) {
      const std::int64_t sign = ((k == 7) != (b == 7)) ? -1 : 1;
      acc += sign * static_cast<std::int64_t>(sums[k][b]) * (std::int64_t{1} << (k + b));
    }
  return static_cast<std::int32_t>(acc);
}

// Accumulate-and-recover unit. Psums arrive per (channel, position) and are
// summed vector-wise; merge() adds (sum I) x M for FCC layers.
class AccumulateRecoverUnit {
 public:
  explicit AccumulateRecoverUnit(const LayerSpec& s) : spec_(s), acc_({s.N, s.out_h(), s.out_w()}) {}

  void accumulate(std::size_t channel, std::size_t position, std::int32_t psum) {
    require(channel < spec_.N && position < spec_.positions(), ErrorKind::Range, "psum target");
    acc_.storage()[channel * spec_.positions() + position] += psum;
  }

  const OutputTensor& psums() const { return acc_; }

  OutputTensor merge(const OutputTensor& sums, const IntPairMeans& means, bool fcc_enabled) const {
    return aru_merge(acc_, sums, means, fcc_enabled, spec_);
  }

  static OutputTensor aru_merge(const OutputTensor& psums, const OutputTensor& sums,
                                const IntPairMeans& means, bool fcc_enabled, const LayerSpec& s) {
    if (!fcc_enabled) return psums;
    return recover(psums, sums, means, s);
  }

 private:
  LayerSpec spec_;
  OutputTensor acc_;
};

inline OutputTensor aru_merge(const OutputTensor& psums, const OutputTensor& window_sums,
                              const IntPairMeans& means, bool fcc_enabled, const LayerSpec& s) {
  return AccumulateRecoverUnit::aru_merge(psums, window_sums, means, fcc_enabled, s);
}

// Window sums from im2col vectors; same layout as window_sum().
inline OutputTensor window_sums(const Im2Col& cols, const LayerSpec& s) {
  OutputTensor out({cols.groups(), s.out_h(), s.out_w()});
  for (std::size_t g = 0; g < cols.groups(); ++g)
    for (std::size_t p = 0; p < cols.positions(); ++p) {
      std::int32_t acc = 0;
      for (std::int8_t v : cols.vector(p, g)) acc += v;
      out.storage()[g * cols.positions() + p] = acc;
    }
  return out;
}

}  // namespace ddcpim
