#pragma once

// Filter-wise complementary correlation (FCC) weight transform.
//
// Adjacent filters (j, j+1) form a pair. The transform mirrors each pair
// around its mean M, quantizes to INT8, then nudges one twin-weight by -1 so
// that (w_j - M) and (w_{j+1} - M) become exact bitwise complements. Only the
// even filter of each pair is then stored; the odd one is its complement.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddcpim/core.hpp"

namespace ddcpim {

// [N][C][K][K]
template <typename T>
using Weights = Tensor<T, 4>;

template <typename T>
struct FilterBank {
  Weights<T> weights;
  std::string layer_id;
  bool fcc_enabled = true;
  double scale = 1.0;  // meaningful for integer banks only; zero point is always 0

  std::size_t filters() const { return weights.dim(0); }
  std::size_t channels() const { return weights.dim(1); }
  std::size_t kernel() const { return weights.dim(2); }
  std::size_t elements_per_filter() const { return channels() * kernel() * weights.dim(3); }
};

using FloatFilterBank = FilterBank<float>;
using Int8FilterBank = FilterBank<std::int8_t>;

template <typename T>
struct PairMeans {
  std::vector<T> means;
  std::size_t size() const { return means.size(); }
  const T& operator[](std::size_t p) const { return means[p]; }
};

using FloatPairMeans = PairMeans<double>;
using IntPairMeans = PairMeans<int>;

struct BiasedCompFilterBank {
  Int8FilterBank bank;
  IntPairMeans means;
};

// Position of one twin-weight pair inside a bank.
struct ElementRef {
  std::size_t pair = 0;
  std::size_t c = 0, ky = 0, kx = 0;

  friend bool operator==(const ElementRef&, const ElementRef&) = default;
};

inline std::string to_string(const ElementRef& e) {
  std::ostringstream os;
  os << "pair " << e.pair << " (filters " << 2 * e.pair << "," << 2 * e.pair + 1 << ") c=" << e.c
     << " ky=" << e.ky << " kx=" << e.kx;
  return os.str();
}

// Only the even filter of each pair is stored; odd filter = bitwise_not8 of it.
struct CompFilterStore {
  Weights<std::int8_t> stored;  // [N/2][C][K][K]
  IntPairMeans means;
  double scale = 1.0;
  std::string layer_id;

  std::size_t pairs() const { return stored.dim(0); }
  std::size_t filters() const { return 2 * pairs(); }

  std::int8_t comp(std::size_t filter, std::size_t c, std::size_t ky, std::size_t kx) const {
    const std::int8_t s = stored(filter / 2, c, ky, kx);
    return (filter % 2 == 0) ? s : bitwise_not8(s);
  }

  // Biased-comp weight seen by the hardware after recovery: comp + M.
  int logical(std::size_t filter, std::size_t c, std::size_t ky, std::size_t kx) const {
    return comp(filter, c, ky, kx) + means[filter / 2];
  }
};

namespace detail {

template <typename T>
void check_pairable(const FilterBank<T>& bank) {
  require(!bank.weights.empty(), ErrorKind::Dimension, "empty filter bank '" + bank.layer_id + "'");
  require(bank.filters() % 2 == 0, ErrorKind::Pairing,
          "filter count " + std::to_string(bank.filters()) + " is odd in '" + bank.layer_id +
              "'; pad with a zero filter or disable FCC");
}

template <typename T, typename M>
void check_means(const FilterBank<T>& bank, const PairMeans<M>& means) {
  require(means.size() == bank.filters() / 2, ErrorKind::Dimension,
          "pair means length " + std::to_string(means.size()) + " does not match " +
              std::to_string(bank.filters() / 2) + " pairs");
}

inline ElementRef element_ref(std::size_t pair, std::size_t e, std::size_t k) {
  ElementRef r;
  r.pair = pair;
  r.kx = e % k;
  r.ky = (e / k) % k;
  r.c = e / (k * k);
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pair means

inline FloatPairMeans compute_pair_means(const FloatFilterBank& bank) {
  detail::check_pairable(bank);
  const std::size_t len = bank.elements_per_filter();
  const auto w = bank.weights.flat();
  FloatPairMeans out;
  out.means.reserve(bank.filters() / 2);
  for (std::size_t p = 0; p < bank.filters() / 2; ++p) {
    // Long-double accumulation keeps the quotient within one ulp of the exact mean.
    long double sum = 0;
    for (std::size_t i = 0; i < 2 * len; ++i) sum += w[2 * p * len + i];
    out.means.push_back(static_cast<double>(sum / static_cast<long double>(2 * len)));
  }
  return out;
}

inline IntPairMeans compute_pair_means(const Int8FilterBank& bank) {
  detail::check_pairable(bank);
  const std::size_t len = bank.elements_per_filter();
  const auto w = bank.weights.flat();
  IntPairMeans out;
  out.means.reserve(bank.filters() / 2);
  for (std::size_t p = 0; p < bank.filters() / 2; ++p) {
    long long sum = 0;
    for (std::size_t i = 0; i < 2 * len; ++i) sum += w[2 * p * len + i];
    out.means.push_back(static_cast<int>(div_round_half_away(sum, static_cast<long long>(2 * len))));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symmetrization: keep the twin farther from M, mirror it onto the other.

inline FloatFilterBank symmetrize(const FloatFilterBank& bank, const FloatPairMeans& means) {
  detail::check_pairable(bank);
  detail::check_means(bank, means);
  FloatFilterBank out = bank;
  const std::size_t len = bank.elements_per_filter();
  auto src = bank.weights.flat();
  auto dst = out.weights.flat();
  for (std::size_t p = 0; p < means.size(); ++p) {
    const double m = means[p];
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t a = 2 * p * len + i, b = a + len;
      const double wa = src[a], wb = src[b];
      if (std::fabs(wa - m) >= std::fabs(wb - m)) {
        dst[a] = static_cast<float>(wa);
        dst[b] = static_cast<float>(2.0 * m - wa);
      } else {
        dst[a] = static_cast<float>(2.0 * m - wb);
        dst[b] = static_cast<float>(wb);
      }
    }
  }
  return out;
}

struct IntSymmetrizeResult {
  Int8FilterBank bank;
  std::vector<ElementRef> saturated;  // mirror image fell outside [-127, 127] and was clamped

  std::vector<std::size_t> flagged_pairs() const {
    std::vector<std::size_t> p;
    for (const auto& e : saturated)
      if (p.empty() || p.back() != e.pair) p.push_back(e.pair);
    return p;
  }
};

inline IntSymmetrizeResult symmetrize(const Int8FilterBank& bank, const IntPairMeans& means) {
  detail::check_pairable(bank);
  detail::check_means(bank, means);
  IntSymmetrizeResult out{bank, {}};
  const std::size_t len = bank.elements_per_filter();
  auto src = bank.weights.flat();
  auto dst = out.bank.weights.flat();
  for (std::size_t p = 0; p < means.size(); ++p) {
    const int m = means[p];
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t a = 2 * p * len + i, b = a + len;
      const int wa = src[a], wb = src[b];
      int keep, mirror;
      std::size_t keep_at, mirror_at;
      if (std::abs(wa - m) >= std::abs(wb - m)) {
        keep = wa, keep_at = a, mirror_at = b;
      } else {
        keep = wb, keep_at = b, mirror_at = a;
      }
      mirror = 2 * m - keep;
      if (mirror < -127 || mirror > 127) {
        mirror = std::clamp(mirror, -127, 127);
        out.saturated.push_back(detail::element_ref(p, i, bank.kernel()));
      }
      dst[keep_at] = static_cast<std::int8_t>(keep);
      dst[mirror_at] = static_cast<std::int8_t>(mirror);
    }
  }
  return out;
}

// Pulls the kept twin of every saturated element inward so the pair is
// symmetric again: kept = 2M - clamped_mirror. Changes weights; opt-in only.
inline std::size_t repair_saturated(Int8FilterBank& bank, const IntPairMeans& means,
                                    const std::vector<ElementRef>& saturated) {
  const std::size_t len = bank.elements_per_filter();
  const std::size_t k = bank.kernel();
  auto w = bank.weights.flat();
  std::size_t repaired = 0;
  for (const auto& e : saturated) {
    const std::size_t i = (e.c * k + e.ky) * k + e.kx;
    const std::size_t a = 2 * e.pair * len + i, b = a + len;
    const int m = means[e.pair];
    // The clamped mirror is the twin closer to M.
    const bool a_clamped = std::abs(w[a] - m) < std::abs(w[b] - m);
    const std::size_t clamped = a_clamped ? a : b, kept = a_clamped ? b : a;
    const int fixed = 2 * m - w[clamped];
    if (fixed >= -127 && fixed <= 127) {
      w[kept] = static_cast<std::int8_t>(fixed);
      ++repaired;
    }
  }
  return repaired;
}

// ---------------------------------------------------------------------------
// Quantization: per-tensor symmetric, zero point 0, range [-127, 127].

struct QuantizeOptions {
  std::optional<double> scale;  // pin the scale instead of max|w| / 127
};

inline double quantization_scale(const FloatFilterBank& bank) {
  double mx = 0;
  for (float v : bank.weights.flat()) mx = std::max(mx, static_cast<double>(std::fabs(v)));
  return mx == 0 ? 1.0 : mx / 127.0;
}

inline Int8FilterBank quantize(const FloatFilterBank& bank, const QuantizeOptions& opt = {}) {
  require(!bank.weights.empty(), ErrorKind::Dimension, "cannot quantize an empty bank");
  const double scale = opt.scale.value_or(quantization_scale(bank));
  require(scale > 0 && std::isfinite(scale), ErrorKind::Precondition, "quantization scale must be positive");
  Int8FilterBank out;
  out.weights = Weights<std::int8_t>(bank.weights.shape());
  out.layer_id = bank.layer_id;
  out.fcc_enabled = bank.fcc_enabled;
  out.scale = scale;
  auto src = bank.weights.flat();
  auto dst = out.weights.flat();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const long long q = round_half_even(static_cast<double>(src[i]) / scale);
    dst[i] = static_cast<std::int8_t>(std::clamp<long long>(q, -127, 127));
  }
  return out;
}

inline FloatFilterBank dequantize(const Int8FilterBank& bank) {
  require(bank.scale > 0, ErrorKind::Precondition, "dequantize needs a positive scale");
  FloatFilterBank out;
  out.weights = Weights<float>(bank.weights.shape());
  out.layer_id = bank.layer_id;
  out.fcc_enabled = bank.fcc_enabled;
  auto src = bank.weights.flat();
  auto dst = out.weights.flat();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = static_cast<float>(static_cast<double>(src[i]) * bank.scale);
  return out;
}

// ---------------------------------------------------------------------------
// Complementization: subtract one from the smaller twin.

inline BiasedCompFilterBank complementize(const Int8FilterBank& bank, const IntPairMeans& means) {
  detail::check_pairable(bank);
  detail::check_means(bank, means);
  BiasedCompFilterBank out{bank, means};
  const std::size_t len = bank.elements_per_filter();
  auto src = bank.weights.flat();
  auto dst = out.bank.weights.flat();
  for (std::size_t p = 0; p < means.size(); ++p) {
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t a = 2 * p * len + i, b = a + len;
      if (src[a] == -128 || src[b] == -128)
        throw Error(ErrorKind::Precondition,
                    "weight -128 cannot be complementized at " +
                        to_string(detail::element_ref(p, i, bank.kernel())));
      if (src[a] >= src[b])
        dst[b] = static_cast<std::int8_t>(src[b] - 1);
      else
        dst[a] = static_cast<std::int8_t>(src[a] - 1);
    }
  }
  return out;
}

// (w_j - M) and (w_{j+1} - M) are bitwise complements as 8-bit patterns.
inline bool is_biased_complement(int wj, int wj1, int m) {
  return static_cast<std::uint8_t>(wrap8(wj - m) ^ wrap8(wj1 - m)) == 0xFF &&
         fits_int8(wj - m) && fits_int8(wj1 - m);
}

// ---------------------------------------------------------------------------
// Decomposition into the stored comp half plus means.

// `tolerated` lists elements (e.g. saturation-flagged ones) exempt from the
// complementarity check; their stored value still comes from the even twin.
inline CompFilterStore decompose(const BiasedCompFilterBank& bc,
                                 const std::vector<ElementRef>& tolerated = {}) {
  const auto& bank = bc.bank;
  detail::check_pairable(bank);
  detail::check_means(bank, bc.means);
  const std::size_t len = bank.elements_per_filter();
  const std::size_t k = bank.kernel();
  CompFilterStore store;
  store.stored = Weights<std::int8_t>({bank.filters() / 2, bank.channels(), k, bank.weights.dim(3)});
  store.means = bc.means;
  store.scale = bank.scale;
  store.layer_id = bank.layer_id;
  auto src = bank.weights.flat();
  auto dst = store.stored.flat();
  for (std::size_t p = 0; p < bc.means.size(); ++p) {
    const int m = bc.means[p];
    for (std::size_t i = 0; i < len; ++i) {
      const int wa = src[2 * p * len + i], wb = src[(2 * p + 1) * len + i];
      if (!is_biased_complement(wa, wb, m)) {
        const ElementRef ref = detail::element_ref(p, i, k);
        if (std::find(tolerated.begin(), tolerated.end(), ref) == tolerated.end())
          throw Error(ErrorKind::Integrity, "twin-weights (" + std::to_string(wa) + ", " +
                                                std::to_string(wb) + ") with M=" + std::to_string(m) +
                                                " are not biased complements at " + to_string(ref));
      }
      dst[p * len + i] = wrap8(wa - m);
    }
  }
  return store;
}

// Rebuilds the full biased-comp bank the store represents.
inline Int8FilterBank reconstruct(const CompFilterStore& store) {
  Int8FilterBank out;
  const auto& s = store.stored;
  out.weights = Weights<std::int8_t>({store.filters(), s.dim(1), s.dim(2), s.dim(3)});
  out.layer_id = store.layer_id;
  out.scale = store.scale;
  for (std::size_t n = 0; n < store.filters(); ++n)
    for (std::size_t c = 0; c < s.dim(1); ++c)
      for (std::size_t y = 0; y < s.dim(2); ++y)
        for (std::size_t x = 0; x < s.dim(3); ++x)
          out.weights(n, c, y, x) = wrap8(store.logical(n, c, y, x));
  return out;
}

// ---------------------------------------------------------------------------
// Verification

struct VerificationReport {
  bool pass = true;
  std::size_t checked = 0;
  std::size_t failure_count = 0;
  std::vector<ElementRef> failures;  // first 10
  std::string message;
};

inline VerificationReport verify_complementarity(const CompFilterStore& store,
                                                 const BiasedCompFilterBank& source) {
  const auto& sw = source.bank.weights;
  require(sw.dim(0) == store.filters() && sw.dim(1) == store.stored.dim(1) &&
              sw.dim(2) == store.stored.dim(2) && sw.dim(3) == store.stored.dim(3),
          ErrorKind::Dimension, "store and source bank dimensions differ");
  require(store.means.size() == source.means.size(), ErrorKind::Dimension, "means length differs");

  VerificationReport rep;
  const std::size_t len = source.bank.elements_per_filter();
  const std::size_t k = store.stored.dim(2);
  auto stored = store.stored.flat();
  auto src = sw.flat();
  for (std::size_t p = 0; p < store.pairs(); ++p) {
    const int m = store.means[p];
    const bool mean_ok = m == source.means[p];
    for (std::size_t i = 0; i < len; ++i) {
      ++rep.checked;
      const std::int8_t even = stored[p * len + i];
      const std::int8_t odd = bitwise_not8(even);
      const bool xor_ok = static_cast<std::uint8_t>(bits_of(even) ^ bits_of(odd)) == 0xFF;
      const bool round_trip = mean_ok && wrap8(even + m) == src[2 * p * len + i] &&
                              wrap8(odd + m) == src[(2 * p + 1) * len + i] &&
                              is_biased_complement(src[2 * p * len + i], src[(2 * p + 1) * len + i], m);
      if (!(xor_ok && round_trip)) {
        rep.pass = false;
        ++rep.failure_count;
        if (rep.failures.size() < 10) rep.failures.push_back(detail::element_ref(p, i, k));
      }
    }
  }
  std::ostringstream os;
  if (rep.pass) {
    os << "complementarity verified on " << rep.checked << " twin-weight pairs";
  } else {
    os << rep.failure_count << " of " << rep.checked << " twin-weight pairs failed; first at "
       << to_string(rep.failures.front());
  }
  rep.message = os.str();
  return rep;
}

// ---------------------------------------------------------------------------
// One-shot pipeline: means -> symmetrize -> quantize -> means -> symmetrize
// -> complementize -> decompose.

struct FccOptions {
  QuantizeOptions quantize;
  bool repair_saturated = false;
};

struct FccResult {
  FloatPairMeans float_means;
  FloatFilterBank float_symmetric;
  Int8FilterBank quantized;
  IntPairMeans int_means;
  Int8FilterBank int_symmetric;
  std::vector<ElementRef> saturated;  // unrepaired saturation flags
  std::size_t repaired = 0;
  BiasedCompFilterBank biased_comp;
  CompFilterStore store;

  // Sum over all elements of |bc - symmetric|; one per twin-weight pair.
  long long complementize_l1() const {
    long long d = 0;
    auto a = biased_comp.bank.weights.flat();
    auto b = int_symmetric.weights.flat();
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
  }
};

inline FccResult finish_fcc(FccResult r, const FccOptions& opt) {
  r.int_means = compute_pair_means(r.quantized);
  auto sym = symmetrize(r.quantized, r.int_means);
  r.int_symmetric = std::move(sym.bank);
  r.saturated = std::move(sym.saturated);
  if (opt.repair_saturated && !r.saturated.empty()) {
    r.repaired = repair_saturated(r.int_symmetric, r.int_means, r.saturated);
    if (r.repaired == r.saturated.size()) r.saturated.clear();
  }
  r.biased_comp = complementize(r.int_symmetric, r.int_means);
  r.store = decompose(r.biased_comp, r.saturated);
  return r;
}

inline FccResult run_fcc(const FloatFilterBank& bank, const FccOptions& opt = {}) {
  FccResult r;
  r.float_means = compute_pair_means(bank);
  r.float_symmetric = symmetrize(bank, r.float_means);
  r.quantized = quantize(r.float_symmetric, opt.quantize);
  return finish_fcc(std::move(r), opt);
}

// Integer entry point: the bank is already quantized.
inline FccResult run_fcc(const Int8FilterBank& bank, const FccOptions& opt = {}) {
  FccResult r;
  r.quantized = bank;
  return finish_fcc(std::move(r), opt);
}

}  // namespace ddcpim
