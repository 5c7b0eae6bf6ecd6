#pragma once

// Reference INT8 convolution used as ground truth for the PIM pipeline.

#include <string>

#include "ddcpim/core.hpp"
#include "ddcpim/fcc.hpp"

namespace ddcpim {

enum class LayerKind { Std, Pw, Dw, Fc };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Std: return "std";
    case LayerKind::Pw: return "pw";
    case LayerKind::Dw: return "dw";
    case LayerKind::Fc: return "fc";
  }
  return "?";
}

inline LayerKind parse_layer_kind(const std::string& s) {
  if (s == "std") return LayerKind::Std;
  if (s == "pw") return LayerKind::Pw;
  if (s == "dw") return LayerKind::Dw;
  if (s == "fc") return LayerKind::Fc;
  throw Error(ErrorKind::Format, "unknown layer kind '" + s + "'");
}

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::Std;
  std::size_t H = 1, W = 1, C = 1, N = 1, K = 1;
  std::size_t stride = 1, pad = 0;
  bool fcc_enabled = true;
  int shift = 0;  // int32 -> int8 requantization right-shift applied after this layer

  std::size_t out_h() const {
    return kind == LayerKind::Fc ? 1 : (H + 2 * pad - K) / stride + 1;
  }
  std::size_t out_w() const {
    return kind == LayerKind::Fc ? 1 : (W + 2 * pad - K) / stride + 1;
  }
  std::size_t positions() const { return out_h() * out_w(); }

  // Length of one receptive-field vector seen by one filter.
  std::size_t depth() const { return kind == LayerKind::Dw ? K * K : K * K * C; }
  std::size_t filter_channels() const { return kind == LayerKind::Dw ? 1 : C; }
  std::size_t weight_count() const { return N * filter_channels() * K * K; }
  bool uses_fcc() const { return fcc_enabled && kind != LayerKind::Fc; }
};

inline void validate(const LayerSpec& s) {
  const std::string where = " in layer '" + s.id + "'";
  require(s.H > 0 && s.W > 0 && s.C > 0 && s.N > 0 && s.K > 0 && s.stride > 0,
          ErrorKind::Dimension, "dimensions must be positive" + where);
  switch (s.kind) {
    case LayerKind::Pw:
      require(s.K == 1, ErrorKind::Dimension, "pw-conv needs K=1" + where);
      break;
    case LayerKind::Dw:
      require(s.N == s.C, ErrorKind::Dimension, "dw-conv needs N == C" + where);
      break;
    case LayerKind::Fc:
      require(s.H == 1 && s.W == 1 && s.K == 1 && s.pad == 0, ErrorKind::Dimension,
              "fc layers need H=W=K=1 and no padding" + where);
      break;
    case LayerKind::Std:
      break;
  }
  require(s.H + 2 * s.pad >= s.K && s.W + 2 * s.pad >= s.K, ErrorKind::Dimension,
          "kernel larger than padded input" + where);
  require(s.depth() <= (std::size_t{1} << 16), ErrorKind::Dimension,
          "K*K*C above 65536 could overflow the 32-bit accumulator" + where);
  require(!(s.uses_fcc() && s.N % 2 != 0), ErrorKind::Pairing,
          "odd N with FCC enabled" + where);
}

// [C][H][W]
using ActivationTensor = Tensor<std::int8_t, 3>;
// [N][H'][W']
using OutputTensor = Tensor<std::int32_t, 3>;

namespace detail {

inline void check_input(const ActivationTensor& in, const LayerSpec& s) {
  require(in.dim(0) == s.C && in.dim(1) == s.H && in.dim(2) == s.W, ErrorKind::Dimension,
          "input tensor shape does not match layer '" + s.id + "'");
}

inline void check_bank(const Weights<std::int8_t>& w, const LayerSpec& s) {
  require(w.dim(0) == s.N && w.dim(1) == s.filter_channels() && w.dim(2) == s.K && w.dim(3) == s.K,
          ErrorKind::Dimension, "filter bank shape does not match layer '" + s.id + "'");
}

// Input value at padded coordinates (zero outside the image).
inline int padded(const ActivationTensor& in, std::size_t c, long y, long x) {
  if (y < 0 || x < 0 || y >= static_cast<long>(in.dim(1)) || x >= static_cast<long>(in.dim(2))) return 0;
  return in(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
}

}  // namespace detail

// Cross-correlation with zero padding; dw pairs channel c with filter c; fc is a mat-vec.
inline OutputTensor conv_direct(const ActivationTensor& in, const Weights<std::int8_t>& w,
                                const LayerSpec& s) {
  validate(s);
  detail::check_input(in, s);
  detail::check_bank(w, s);
  OutputTensor out({s.N, s.out_h(), s.out_w()});
  const long pad = static_cast<long>(s.pad);
  for (std::size_t n = 0; n < s.N; ++n)
    for (std::size_t oy = 0; oy < s.out_h(); ++oy)
      for (std::size_t ox = 0; ox < s.out_w(); ++ox) {
        std::int32_t acc = 0;
        const std::size_t c_begin = s.kind == LayerKind::Dw ? n : 0;
        const std::size_t c_end = s.kind == LayerKind::Dw ? n + 1 : s.C;
        for (std::size_t c = c_begin; c < c_end; ++c)
          for (std::size_t ky = 0; ky < s.K; ++ky)
            for (std::size_t kx = 0; kx < s.K; ++kx) {
              const long y = static_cast<long>(oy * s.stride + ky) - pad;
              const long x = static_cast<long>(ox * s.stride + kx) - pad;
              const std::size_t fc = s.kind == LayerKind::Dw ? 0 : c;
              acc += detail::padded(in, c, y, x) * w(n, fc, ky, kx);
            }
        out(n, oy, ox) = acc;
      }
  return out;
}

inline OutputTensor conv_direct(const ActivationTensor& in, const Int8FilterBank& bank,
                                const LayerSpec& s) {
  return conv_direct(in, bank.weights, s);
}

inline OutputTensor conv_direct(const ActivationTensor& in, const BiasedCompFilterBank& bank,
                                const LayerSpec& s) {
  return conv_direct(in, bank.bank.weights, s);
}

// Sum of the receptive field per output position: [1][H'][W'] for std/pw/fc
// (all channels share it), [C][H'][W'] for dw.
inline OutputTensor window_sum(const ActivationTensor& in, const LayerSpec& s) {
  validate(s);
  detail::check_input(in, s);
  const bool dw = s.kind == LayerKind::Dw;
  OutputTensor out({dw ? s.C : 1, s.out_h(), s.out_w()});
  const long pad = static_cast<long>(s.pad);
  for (std::size_t g = 0; g < out.dim(0); ++g)
    for (std::size_t oy = 0; oy < s.out_h(); ++oy)
      for (std::size_t ox = 0; ox < s.out_w(); ++ox) {
        std::int32_t acc = 0;
        for (std::size_t c = dw ? g : 0; c < (dw ? g + 1 : s.C); ++c)
          for (std::size_t ky = 0; ky < s.K; ++ky)
            for (std::size_t kx = 0; kx < s.K; ++kx)
              acc += detail::padded(in, c, static_cast<long>(oy * s.stride + ky) - pad,
                                    static_cast<long>(ox * s.stride + kx) - pad);
        out(g, oy, ox) = acc;
      }
  return out;
}

// Output channel j gets comp_out[j] + window_sum * M_{j/2}.
inline OutputTensor recover(const OutputTensor& comp_out, const OutputTensor& sums,
                            const IntPairMeans& means, const LayerSpec& s) {
  require(comp_out.dim(0) == s.N, ErrorKind::Dimension, "comp output channel count mismatch");
  require(means.size() * 2 == s.N, ErrorKind::Pairing,
          "means cover " + std::to_string(2 * means.size()) + " channels, layer has " +
              std::to_string(s.N));
  const bool dw = s.kind == LayerKind::Dw;
  require(sums.dim(0) == (dw ? s.C : 1) && sums.dim(1) == comp_out.dim(1) &&
              sums.dim(2) == comp_out.dim(2),
          ErrorKind::Dimension, "window sums do not align with comp output");
  OutputTensor out = comp_out;
  for (std::size_t n = 0; n < s.N; ++n)
    for (std::size_t y = 0; y < out.dim(1); ++y)
      for (std::size_t x = 0; x < out.dim(2); ++x)
        out(n, y, x) += sums(dw ? n : 0, y, x) * means[n / 2];
  return out;
}

// Comp-filter bank (stored + implicit channels, without the mean) as plain weights.
inline Weights<std::int8_t> comp_weights(const CompFilterStore& store) {
  const auto& st = store.stored;
  Weights<std::int8_t> w({store.filters(), st.dim(1), st.dim(2), st.dim(3)});
  for (std::size_t n = 0; n < store.filters(); ++n)
    for (std::size_t c = 0; c < st.dim(1); ++c)
      for (std::size_t y = 0; y < st.dim(2); ++y)
        for (std::size_t x = 0; x < st.dim(3); ++x) w(n, c, y, x) = store.comp(n, c, y, x);
  return w;
}

}  // namespace ddcpim
