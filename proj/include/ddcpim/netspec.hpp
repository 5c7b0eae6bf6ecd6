#pragma once

// Network spec files (JSON):
//   { "name": "...", "features": {"config": "full"},
//     "layers": [ {"id", "kind", "H", "W", "C", "N", "K", "stride", "pad",
//                  "fcc_enabled", "shift", "post", "weight_scale"}, ... ] }
// Only id/kind/H/W/C/N are required. post is "none" or "avgpool" (global
// average over H x W, applied after requantization).

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddcpim/mapper.hpp"
#include "ddcpim/oracle.hpp"

namespace ddcpim {

enum class PostOp { None, AvgPool };

struct NetLayer {
  LayerSpec spec;
  PostOp post = PostOp::None;
  std::optional<double> weight_scale;  // pins the quantization scale
};

struct NetworkSpec {
  std::string name;
  std::vector<NetLayer> layers;
  std::optional<FeatureConfig> features;

  const NetLayer& layer(const std::string& id) const {
    for (const auto& l : layers)
      if (l.spec.id == id) return l;
    throw Error(ErrorKind::Config, "network '" + name + "' has no layer '" + id + "'");
  }
};

// Shape of a layer's output after requantization and its post op.
inline std::array<std::size_t, 3> output_shape(const NetLayer& l) {
  if (l.post == PostOp::AvgPool) return {l.spec.N, 1, 1};
  return {l.spec.N, l.spec.out_h(), l.spec.out_w()};
}

// Layer i+1 consumes layer i's output; fc layers read it flattened.
inline void validate_chain(const NetworkSpec& net) {
  for (std::size_t i = 1; i < net.layers.size(); ++i) {
    const auto [c, h, w] = output_shape(net.layers[i - 1]);
    const LayerSpec& s = net.layers[i].spec;
    const std::string msg = "layer '" + s.id + "' expects " + std::to_string(s.C) + "x" + std::to_string(s.H) +
                            "x" + std::to_string(s.W) + " but '" + net.layers[i - 1].spec.id + "' produces " +
                            std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    if (s.kind == LayerKind::Fc)
      require(s.C == c * h * w, ErrorKind::Dimension, msg);
    else
      require(s.C == c && s.H == h && s.W == w, ErrorKind::Dimension, msg);
  }
}

inline NetworkSpec parse_netspec(const std::string& text, bool check_chain = true) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("netspec is not valid JSON: ") + e.what());
  }
  NetworkSpec net;
  try {
    net.name = j.value("name", std::string("network"));
    if (j.contains("features")) net.features = FeatureConfig::parse(j.at("features").value("config", "full"));
    require(j.contains("layers") && j.at("layers").is_array() && !j.at("layers").empty(), ErrorKind::Format,
            "netspec needs a non-empty 'layers' array");
    std::size_t index = 0;
    for (const auto& e : j.at("layers")) {
      NetLayer l;
      LayerSpec& s = l.spec;
      s.id = e.value("id", "L" + std::to_string(index));
      s.kind = parse_layer_kind(e.at("kind").get<std::string>());
      s.H = e.at("H").get<std::size_t>();
      s.W = e.at("W").get<std::size_t>();
      s.C = e.at("C").get<std::size_t>();
      s.N = e.at("N").get<std::size_t>();
      s.K = e.value("K", std::size_t{1});
      s.stride = e.value("stride", std::size_t{1});
      s.pad = e.value("pad", std::size_t{0});
      s.fcc_enabled = e.value("fcc_enabled", s.kind != LayerKind::Fc);
      s.shift = e.value("shift", 0);
      require(s.shift >= 0 && s.shift < 32, ErrorKind::Format, "shift out of range in layer '" + s.id + "'");
      const std::string post = e.value("post", std::string("none"));
      if (post == "avgpool")
        l.post = PostOp::AvgPool;
      else
        require(post == "none", ErrorKind::Format, "unknown post op '" + post + "' in layer '" + s.id + "'");
      if (e.contains("weight_scale")) {
        l.weight_scale = e.at("weight_scale").get<double>();
        require(*l.weight_scale > 0, ErrorKind::Format, "weight_scale must be positive in '" + s.id + "'");
      }
      validate(s);
      for (const auto& prev : net.layers)
        require(prev.spec.id != s.id, ErrorKind::Format, "duplicate layer id '" + s.id + "'");
      net.layers.push_back(std::move(l));
      ++index;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("netspec field: ") + e.what());
  }
  if (check_chain) validate_chain(net);
  return net;
}

inline NetworkSpec load_netspec(const std::string& path, bool check_chain = true) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::Format, "cannot open netspec '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_netspec(ss.str(), check_chain);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.detail());
  }
}

}  // namespace ddcpim
