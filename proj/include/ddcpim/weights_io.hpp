#pragma once

// Weight directory layout, one set of files per layer id:
//   <id>.weights.ddct  float32 or int8 [N][Cf][K][K]   transform input
//   <id>.store.ddct    int8  [N/2][Cf][K][K]          comp store (FCC layers)
//   <id>.means.ddct    int16 [N/2]                    pair means (FCC layers)
//   <id>.bc.ddct       int8  [N][Cf][K][K]            biased-comp bank (FCC layers)
//   <id>.plain.ddct    int8  [N][Cf][K][K]            quantized bank (other layers)

#include <filesystem>
#include <string>

#include "ddcpim/ddct.hpp"
#include "ddcpim/mapper.hpp"

namespace ddcpim {

inline std::string layer_file(const std::string& dir, const std::string& id, const std::string& what) {
  return (std::filesystem::path(dir) / (id + "." + what + ".ddct")).string();
}

template <typename T>
void check_weight_shape(const Weights<T>& w, std::size_t filters, const LayerSpec& s, const std::string& what) {
  const typename Weights<T>::Shape want{filters, s.filter_channels(), s.K, s.K};
  require(w.shape() == want, ErrorKind::Dimension, what + " of layer '" + s.id + "' has the wrong shape");
}

inline IntPairMeans means_from(const DdctFile& f) {
  IntPairMeans m;
  for (auto v : f.values<std::int16_t>()) m.means.push_back(v);
  return m;
}

inline DdctFile means_to_ddct(const IntPairMeans& m) {
  std::vector<std::int16_t> v;
  for (int x : m.means) {
    require(x >= -32768 && x <= 32767, ErrorKind::Range, "pair mean does not fit int16");
    v.push_back(static_cast<std::int16_t>(x));
  }
  std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(v.size())};
  return DdctFile::from<std::int16_t>(std::move(dims), std::move(v));
}

// Weights the simulator runs plus the independent bank the oracle checks
// against (the biased-comp bank for FCC layers, the plain bank otherwise).
struct LoadedLayer {
  LayerWeights weights;
  Weights<std::int8_t> oracle_bank;
};

inline LoadedLayer load_layer(const std::string& dir, const LayerSpec& s) {
  LoadedLayer l;
  if (s.uses_fcc()) {
    CompFilterStore st;
    st.layer_id = s.id;
    st.stored = read_ddct(layer_file(dir, s.id, "store")).tensor<std::int8_t, 4>();
    st.means = means_from(read_ddct(layer_file(dir, s.id, "means")));
    check_weight_shape(st.stored, s.N / 2, s, "comp store");
    require(st.means.size() == s.N / 2, ErrorKind::Dimension, "means of layer '" + s.id + "' have the wrong length");
    l.oracle_bank = read_ddct(layer_file(dir, s.id, "bc")).tensor<std::int8_t, 4>();
    check_weight_shape(l.oracle_bank, s.N, s, "biased-comp bank");
    l.weights.store = std::move(st);
  } else {
    l.oracle_bank = read_ddct(layer_file(dir, s.id, "plain")).tensor<std::int8_t, 4>();
    check_weight_shape(l.oracle_bank, s.N, s, "plain bank");
    l.weights.plain = l.oracle_bank;
  }
  return l;
}

}  // namespace ddcpim
