#pragma once

// Cycle accounting over schedules and the four-step ablation ladder.

#include <cstdint>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ddcpim/mapper.hpp"

namespace ddcpim {

struct CycleConstants {
  std::uint64_t cycles_per_bit_plane = 1;  // per ComputePass per input bit plane
  std::uint64_t write_latency = 1;         // per LoadRows wordline write
  std::uint64_t overlap = 1;               // pipeline overlap factor on compute
};

struct LayerCycles {
  std::string layer_id;
  LayerKind kind = LayerKind::Std;
  std::string config;
  std::uint64_t load_cycles = 0;
  std::uint64_t compute_cycles = 0;
  Parallelism parallelism;

  std::uint64_t total() const { return load_cycles + compute_cycles; }
};

inline void check_consistent(const Schedule& sch, const FeatureConfig& f) {
  f.validate();
  const bool dw = sch.layer.kind == LayerKind::Dw;
  if (sch.uses_mode(MacroMode::Double)) {
    require(dw ? f.fcc_dw_dbis : f.fcc_std_pw, ErrorKind::Config,
            "layer '" + sch.layer.id + "' uses double computing mode, config '" + f.name() + "' does not allow it");
  }
  if (sch.uses_adder(AdderConfig::Staged) || sch.uses_adder(AdderConfig::Split)) {
    require(f.reconfig_unit, ErrorKind::Config,
            "layer '" + sch.layer.id + "' needs the reconfigurable unit, config '" + f.name() + "' lacks it");
  }
}

inline LayerCycles count_cycles(const Schedule& sch, const FeatureConfig& f, const CycleConstants& k = {}) {
  check_consistent(sch, f);
  require(k.overlap > 0, ErrorKind::Precondition, "overlap factor must be positive");
  LayerCycles c;
  c.layer_id = sch.layer.id;
  c.kind = sch.layer.kind;
  c.config = f.name();
  c.parallelism = sch.parallelism;
  c.compute_cycles =
      static_cast<std::uint64_t>(sch.compute_passes()) * 8 * k.cycles_per_bit_plane / k.overlap;
  c.load_cycles = static_cast<std::uint64_t>(sch.load_steps()) * k.write_latency;
  return c;
}

struct NetworkLayer {
  LayerSpec spec;
  std::map<std::string, Schedule> schedules;  // keyed by FeatureConfig::name()
};

struct ConfigTotals {
  std::string config;
  std::uint64_t load_cycles = 0;
  std::uint64_t compute_cycles = 0;
  std::uint64_t total() const { return load_cycles + compute_cycles; }
  double speedup = 1.0;  // baseline total / this total
};

struct CycleReport {
  std::string network;
  std::vector<LayerCycles> layers;  // every layer under every config
  std::vector<ConfigTotals> totals;  // ladder order

  const ConfigTotals& totals_for(const std::string& config) const {
    for (const auto& t : totals)
      if (t.config == config) return t;
    throw Error(ErrorKind::Config, "report has no config '" + config + "'");
  }

  const LayerCycles& layer(const std::string& id, const std::string& config) const {
    for (const auto& l : layers)
      if (l.layer_id == id && l.config == config) return l;
    throw Error(ErrorKind::Config, "report has no layer '" + id + "' under '" + config + "'");
  }

  // Baseline cycles spent in dw-conv layers over the baseline total.
  double baseline_dw_fraction() const {
    std::uint64_t dw = 0;
    for (const auto& l : layers)
      if (l.config == "baseline" && l.kind == LayerKind::Dw) dw += l.total();
    return static_cast<double>(dw) / static_cast<double>(totals_for("baseline").total());
  }

  bool ladder_monotone() const {
    for (std::size_t i = 1; i < totals.size(); ++i)
      if (totals[i].speedup < totals[i - 1].speedup) return false;
    return true;
  }
};

inline CycleReport network_report(const std::string& name, const std::vector<NetworkLayer>& layers,
                                  const std::vector<FeatureConfig>& configs, const CycleConstants& k = {}) {
  require(!configs.empty() && configs.front() == FeatureConfig::baseline(), ErrorKind::Config,
          "the first config of a report must be the baseline");
  CycleReport rep;
  rep.network = name;
  for (const auto& f : configs) {
    ConfigTotals t;
    t.config = f.name();
    for (const auto& l : layers) {
      auto it = l.schedules.find(t.config);
      require(it != l.schedules.end(), ErrorKind::Config,
              "layer '" + l.spec.id + "' has no schedule for config '" + t.config + "'");
      LayerCycles c = count_cycles(it->second, f, k);
      t.load_cycles += c.load_cycles;
      t.compute_cycles += c.compute_cycles;
      rep.layers.push_back(std::move(c));
    }
    rep.totals.push_back(t);
  }
  const double base = static_cast<double>(rep.totals.front().total());
  for (auto& t : rep.totals) t.speedup = base / static_cast<double>(t.total());
  return rep;
}

// CSV: layer_id,kind,config,load_cycles,compute_cycles,total,speedup
inline void write_csv(std::ostream& os, const CycleReport& rep) {
  os << "layer_id,kind,config,load_cycles,compute_cycles,total,speedup\n";
  auto fmt = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(4);
    s << v;
    return s.str();
  };
  for (const auto& l : rep.layers) {
    const LayerCycles& base = rep.layer(l.layer_id, "baseline");
    os << l.layer_id << "," << to_string(l.kind) << "," << l.config << "," << l.load_cycles << ","
       << l.compute_cycles << "," << l.total() << ","
       << fmt(static_cast<double>(base.total()) / static_cast<double>(l.total())) << "\n";
  }
  for (const auto& t : rep.totals)
    os << "TOTAL,network," << t.config << "," << t.load_cycles << "," << t.compute_cycles << "," << t.total()
       << "," << fmt(t.speedup) << "\n";
}

}  // namespace ddcpim
