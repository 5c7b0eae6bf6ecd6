#pragma once

// Layer-to-layer glue: requantization, post ops, per-config scheduling of a
// whole network.

#include <algorithm>
#include <map>
#include <vector>

#include "ddcpim/netspec.hpp"
#include "ddcpim/simulator.hpp"
#include "ddcpim/timing.hpp"

namespace ddcpim {

// Rounding right shift, saturated to int8.
inline std::int8_t requantize(std::int32_t v, int shift) {
  long long x = v;
  if (shift > 0) x = (x + (1LL << (shift - 1))) >> shift;
  return static_cast<std::int8_t>(std::clamp<long long>(x, -128, 127));
}

inline ActivationTensor requantize(const OutputTensor& out, int shift) {
  ActivationTensor a(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) a.storage()[i] = requantize(out.storage()[i], shift);
  return a;
}

inline ActivationTensor apply_post(const ActivationTensor& a, PostOp op) {
  if (op == PostOp::None) return a;
  const std::size_t hw = a.dim(1) * a.dim(2);
  ActivationTensor p({a.dim(0), 1, 1});
  for (std::size_t c = 0; c < a.dim(0); ++c) {
    long long s = 0;
    for (std::size_t i = 0; i < hw; ++i) s += a.storage()[c * hw + i];
    p.storage()[c] = static_cast<std::int8_t>(div_round_half_away(s, static_cast<long long>(hw)));
  }
  return p;
}

// Reshapes an activation into the [C][H][W] a layer expects; fc layers take
// the flattened tensor.
inline ActivationTensor as_layer_input(const ActivationTensor& a, const LayerSpec& s) {
  ActivationTensor in({s.C, s.H, s.W});
  require(a.size() == in.size(), ErrorKind::Dimension,
          "layer '" + s.id + "' input has " + std::to_string(a.size()) + " values, expected " +
              std::to_string(in.size()));
  in.storage() = a.storage();
  return in;
}

// All-zero weights of the right shape; enough for cycle accounting, which
// depends only on shapes.
inline LayerWeights zero_weights(const LayerSpec& s) {
  LayerWeights w;
  const std::size_t cf = s.filter_channels();
  if (s.uses_fcc()) {
    CompFilterStore st;
    st.stored = Weights<std::int8_t>({s.N / 2, cf, s.K, s.K});
    st.means.means.assign(s.N / 2, 0);
    st.layer_id = s.id;
    w.store = std::move(st);
  } else {
    w.plain = Weights<std::int8_t>({s.N, cf, s.K, s.K});
  }
  return w;
}

inline std::vector<NetworkLayer> schedule_network(const NetworkSpec& net, const std::vector<FeatureConfig>& configs,
                                                  const std::map<std::string, LayerWeights>* weights = nullptr) {
  std::vector<NetworkLayer> out;
  for (const auto& l : net.layers) {
    NetworkLayer nl;
    nl.spec = l.spec;
    const LayerWeights w = weights ? weights->at(l.spec.id) : zero_weights(l.spec);
    for (const auto& f : configs) nl.schedules.emplace(f.name(), map_layer(l.spec, w, f));
    out.push_back(std::move(nl));
  }
  return out;
}

inline std::vector<FeatureConfig> ladder_vector() {
  const auto& l = ablation_ladder();
  return {l.begin(), l.end()};
}

inline CycleReport network_cycles(const NetworkSpec& net, const CycleConstants& k = {}) {
  return network_report(net.name, schedule_network(net, ladder_vector()), ladder_vector(), k);
}

}  // namespace ddcpim
