#pragma once

// Lowers a layer onto the four PIM macros as a Schedule of wordline loads and
// compute passes. One ComputePass is a template executed once per output
// position; it drives one row per macro for all eight input bit planes.

#include <algorithm>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddcpim/core.hpp"
#include "ddcpim/fcc.hpp"
#include "ddcpim/macro.hpp"
#include "ddcpim/oracle.hpp"

namespace ddcpim {

struct FeatureConfig {
  bool fcc_std_pw = false;
  bool fcc_dw_dbis = false;
  bool reconfig_unit = false;

  static FeatureConfig baseline() { return {}; }
  static FeatureConfig fcc() { return {true, false, false}; }
  static FeatureConfig fcc_dbis() { return {true, true, false}; }
  static FeatureConfig full() { return {true, true, true}; }

  void validate() const {
    require(!reconfig_unit || fcc_dw_dbis, ErrorKind::Config,
            "the reconfigurable unit needs FCC with dual-broadcast inputs for dw-conv");
  }

  std::string name() const {
    if (!fcc_std_pw && !fcc_dw_dbis && !reconfig_unit) return "baseline";
    if (fcc_std_pw && !fcc_dw_dbis && !reconfig_unit) return "fcc";
    if (fcc_std_pw && fcc_dw_dbis && !reconfig_unit) return "fcc+dbis";
    if (fcc_std_pw && fcc_dw_dbis && reconfig_unit) return "full";
    std::string s;
    if (fcc_std_pw) s += "fcc-std-pw,";
    if (fcc_dw_dbis) s += "fcc-dw-dbis,";
    if (reconfig_unit) s += "reconfig,";
    return s.empty() ? "baseline" : s.substr(0, s.size() - 1);
  }

  static FeatureConfig parse(const std::string& s) {
    if (s == "baseline") return baseline();
    if (s == "fcc") return fcc();
    if (s == "fcc+dbis") return fcc_dbis();
    if (s == "full") return full();
    throw Error(ErrorKind::Config, "unknown feature config '" + s + "'");
  }

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

inline const std::array<FeatureConfig, 4>& ablation_ladder() {
  static const std::array<FeatureConfig, 4> ladder{FeatureConfig::baseline(), FeatureConfig::fcc(),
                                                   FeatureConfig::fcc_dbis(), FeatureConfig::full()};
  return ladder;
}

// ---------------------------------------------------------------------------
// Schedule

// Writes one wordline of a macro: row `row` of every compartment in `mask`.
struct LoadRows {
  std::size_t macro = 0;
  std::size_t row = 0;
  std::uint32_t mask = 0;
  std::array<RowImage, kCompartments> images{};
};

// Compartments [first, first+length) receive vector elements
// [element_begin, element_begin+length) of the INP / INN source vectors.
// Sources index im2col groups (0 for shared std/pw/fc vectors, the channel
// for dw); -1 drives zeros.
struct LaneBinding {
  std::size_t first = 0;
  std::size_t length = 0;
  std::size_t element_begin = 0;
  int inp_source = -1;
  int inn_source = -1;
};

struct OutputBinding {
  std::size_t unit = 0;
  TreeSelect tree = TreeSelect::Both;
  std::size_t channel = 0;
};

struct MacroActivation {
  std::size_t macro = 0;
  std::size_t row = 0;
  std::vector<LaneBinding> lanes;
  std::vector<OutputBinding> outputs;

  std::uint32_t compartment_mask() const {
    std::uint32_t m = 0;
    for (const auto& l : lanes)
      for (std::size_t c = l.first; c < l.first + l.length; ++c) m |= 1u << c;
    return m;
  }
};

struct ComputePass {
  MacroMode mode = MacroMode::Regular;
  AdderConfig adder = AdderConfig::Combined;
  std::size_t stage = 0;
  std::vector<MacroActivation> macros;
};

struct Round {
  std::vector<LoadRows> loads;
  std::vector<ComputePass> passes;
};

struct Parallelism {
  std::size_t X = 0, Y = 0, B = 0;
  std::size_t product() const { return X * Y * B; }
  friend bool operator==(const Parallelism&, const Parallelism&) = default;
};

inline std::string to_string(const Parallelism& p) {
  return std::to_string(p.X) + "x" + std::to_string(p.Y) + "x" + std::to_string(p.B);
}

struct Schedule {
  LayerSpec layer;
  bool recover = false;  // ARU adds (sum I) x M
  IntPairMeans means;
  std::vector<Round> rounds;
  Parallelism parallelism;

  std::size_t load_steps() const {
    std::size_t n = 0;
    for (const auto& r : rounds) n += r.loads.size();
    return n;
  }
  std::size_t pass_templates() const {
    std::size_t n = 0;
    for (const auto& r : rounds) n += r.passes.size();
    return n;
  }
  // ComputePass executions over all output positions.
  std::size_t compute_passes() const { return pass_templates() * layer.positions(); }
  bool uses_mode(MacroMode m) const {
    for (const auto& r : rounds)
      for (const auto& p : r.passes)
        if (p.mode == m) return true;
    return false;
  }
  bool uses_adder(AdderConfig a) const {
    for (const auto& r : rounds)
      for (const auto& p : r.passes)
        if (p.adder == a) return true;
    return false;
  }
};

namespace detail {

inline Parallelism measure(const std::vector<Round>& rounds) {
  Parallelism p;
  for (const auto& r : rounds)
    for (const auto& pass : r.passes) {
      p.Y = std::max(p.Y, pass.macros.size());
      for (const auto& a : pass.macros) {
        p.X = std::max<std::size_t>(p.X, static_cast<std::size_t>(std::popcount(a.compartment_mask())));
        std::size_t lower = 0, upper = 0, both = 0;
        for (const auto& o : a.outputs) {
          if (o.tree == TreeSelect::Both) ++both;
          if (o.tree == TreeSelect::Lower) ++lower;
          if (o.tree == TreeSelect::Upper) ++upper;
        }
        p.B = std::max(p.B, 8 * std::max({both, lower, upper}));
      }
    }
  return p;
}

// Packs rows into (round, row) slots of 64 rows; slot index i -> round i/64.
struct RowAllocator {
  std::vector<Round>& rounds;
  Round& round_for(std::size_t index) {
    const std::size_t r = index / kRows;
    if (rounds.size() <= r) rounds.resize(r + 1);
    return rounds[r];
  }
};

inline std::int8_t weight_or_zero(const Weights<std::int8_t>& w, std::size_t filter, std::size_t e) {
  if (filter >= w.dim(0)) return 0;
  const std::size_t len = w.dim(1) * w.dim(2) * w.dim(3);
  return w.storage()[filter * len + e];
}

inline std::int8_t stored_or_zero(const CompFilterStore& s, std::size_t pair, std::size_t e) {
  if (pair >= s.pairs()) return 0;
  const std::size_t len = s.stored.dim(1) * s.stored.dim(2) * s.stored.dim(3);
  return s.stored.storage()[pair * len + e];
}

inline void check_store(const CompFilterStore& store, const LayerSpec& s) {
  require(store.filters() == s.N && store.stored.dim(1) == s.filter_channels() &&
              store.stored.dim(2) == s.K && store.stored.dim(3) == s.K,
          ErrorKind::Dimension, "comp store shape does not match layer '" + s.id + "'");
  require(store.means.size() == store.pairs(), ErrorKind::Dimension, "store means length");
}

// Schedules row-stationary vectors: `groups` row groups each covering the
// full depth, spread output-channel-major over macros, depth over rows.
template <typename ImageFn, typename OutputFn>
std::vector<Round> tile_shared_vector(const LayerSpec& s, std::size_t groups, MacroMode mode,
                                      ImageFn image, OutputFn outputs) {
  std::vector<Round> rounds;
  RowAllocator alloc{rounds};
  const std::size_t depth = s.depth();
  const std::size_t tiles = (depth + kCompartments - 1) / kCompartments;
  const std::size_t per_macro = (groups + kMacros - 1) / kMacros;
  for (std::size_t gq = 0; gq < per_macro; ++gq)
    for (std::size_t t = 0; t < tiles; ++t) {
      const std::size_t index = gq * tiles + t;
      Round& round = alloc.round_for(index);
      const std::size_t row = index % kRows;
      const std::size_t len = std::min(kCompartments, depth - t * kCompartments);
      ComputePass pass;
      pass.mode = mode;
      pass.adder = AdderConfig::Combined;
      for (std::size_t m = 0; m < kMacros; ++m) {
        const std::size_t g = gq * kMacros + m;
        if (g >= groups) break;
        LoadRows load;
        load.macro = m;
        load.row = row;
        for (std::size_t c = 0; c < len; ++c) {
          load.mask |= 1u << c;
          load.images[c] = image(g, t * kCompartments + c);
        }
        round.loads.push_back(load);
        MacroActivation act;
        act.macro = m;
        act.row = row;
        act.lanes.push_back({0, len, t * kCompartments, 0, mode == MacroMode::Double ? 0 : -1});
        act.outputs = outputs(g);
        pass.macros.push_back(std::move(act));
      }
      round.passes.push_back(std::move(pass));
    }
  return rounds;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// std-conv / pw-conv with FCC: row image {f^c_4g, f^c_4g+2}; Q-bar supplies
// f^c_4g+1 and f^c_4g+3. Double mode with INN == INP.

inline Schedule map_std_pw(const CompFilterStore& store, const LayerSpec& s) {
  validate(s);
  require(s.kind == LayerKind::Std || s.kind == LayerKind::Pw, ErrorKind::Config,
          "map_std_pw needs a std or pw layer");
  require(s.fcc_enabled, ErrorKind::Config, "map_std_pw needs an FCC-enabled layer");
  detail::check_store(store, s);
  const std::size_t groups = (s.N + 3) / 4;
  Schedule sch;
  sch.layer = s;
  sch.recover = true;
  sch.means = store.means;
  sch.rounds = detail::tile_shared_vector(
      s, groups, MacroMode::Double,
      [&](std::size_t g, std::size_t e) {
        return RowImage::pack(detail::stored_or_zero(store, 2 * g, e),
                              detail::stored_or_zero(store, 2 * g + 1, e));
      },
      [&](std::size_t g) {
        std::vector<OutputBinding> out;
        for (std::size_t u = 0; u < kAdderUnits; ++u)
          if (4 * g + u < s.N) out.push_back({u, TreeSelect::Both, 4 * g + u});
        return out;
      });
  sch.parallelism = detail::measure(sch.rounds);
  return sch;
}

// Regular computing mode on plain INT8 weights: row image {f_2g, f_2g+1}.
// Used for fc layers and for every layer the baseline machine runs.
inline Schedule map_regular(const Weights<std::int8_t>& w, const LayerSpec& s) {
  validate(s);
  detail::check_bank(w, s);
  Schedule sch;
  sch.layer = s;
  sch.recover = false;
  if (s.kind != LayerKind::Dw) {
    const std::size_t groups = (s.N + 1) / 2;
    sch.rounds = detail::tile_shared_vector(
        s, groups, MacroMode::Regular,
        [&](std::size_t g, std::size_t e) {
          return RowImage::pack(detail::weight_or_zero(w, 2 * g, e), detail::weight_or_zero(w, 2 * g + 1, e));
        },
        [&](std::size_t g) {
          std::vector<OutputBinding> out{{0, TreeSelect::Both, 2 * g}};
          if (2 * g + 1 < s.N) out.push_back({2, TreeSelect::Both, 2 * g + 1});
          return out;
        });
  } else {
    // dw without DBIS: each channel has its own input, so one filter per pass.
    detail::RowAllocator alloc{sch.rounds};
    const std::size_t depth = s.depth();
    const std::size_t tiles = (depth + kCompartments - 1) / kCompartments;
    for (std::size_t g = 0; g < (s.N + 1) / 2; ++g)
      for (std::size_t t = 0; t < tiles; ++t) {
        const std::size_t index = g * tiles + t;
        Round& round = alloc.round_for(index);
        const std::size_t row = index % kRows;
        const std::size_t len = std::min(kCompartments, depth - t * kCompartments);
        LoadRows load;
        load.row = row;
        for (std::size_t c = 0; c < len; ++c) {
          load.mask |= 1u << c;
          load.images[c] = RowImage::pack(detail::weight_or_zero(w, 2 * g, t * kCompartments + c),
                                          detail::weight_or_zero(w, 2 * g + 1, t * kCompartments + c));
        }
        round.loads.push_back(load);
        for (std::size_t stage = 0; stage < 2; ++stage) {
          const std::size_t ch = 2 * g + stage;
          if (ch >= s.N) break;
          ComputePass pass;
          pass.mode = MacroMode::Regular;
          pass.stage = stage;
          MacroActivation act;
          act.row = row;
          act.lanes.push_back({0, len, t * kCompartments, static_cast<int>(ch), -1});
          act.outputs.push_back({2 * stage, TreeSelect::Both, ch});
          pass.macros.push_back(std::move(act));
          round.passes.push_back(std::move(pass));
        }
      }
  }
  sch.parallelism = detail::measure(sch.rounds);
  return sch;
}

inline Schedule map_fc(const Int8FilterBank& bank, const LayerSpec& s) {
  require(s.kind == LayerKind::Fc, ErrorKind::Config, "map_fc needs an fc layer");
  return map_regular(bank.weights, s);
}

// ---------------------------------------------------------------------------
// dw-conv with FCC and dual-broadcast inputs. A quad row {f^c_4q, f^c_4q+2}
// holds four logical filters; INP/INN carry two different channels, so each
// row runs two stages (weight slot A, then slot B). With the reconfigurable
// unit and K*K <= 16, a second quad sits at compartment 16 and the adder
// trees report separately.

struct DwFeatures {
  bool reconfig = true;
};

inline Schedule map_dw(const CompFilterStore& store, const LayerSpec& s, DwFeatures features = {}) {
  validate(s);
  require(s.kind == LayerKind::Dw, ErrorKind::Config, "map_dw needs a dw layer");
  require(s.fcc_enabled, ErrorKind::Config, "map_dw needs an FCC-enabled layer");
  detail::check_store(store, s);
  Schedule sch;
  sch.layer = s;
  sch.recover = true;
  sch.means = store.means;
  detail::RowAllocator alloc{sch.rounds};
  const std::size_t depth = s.depth();
  const bool two_quads = features.reconfig && depth <= kTreeWidth;
  const std::size_t quads_per_row = two_quads ? 2 : 1;
  const std::size_t quads = (s.N + 3) / 4;
  const std::size_t tiles = two_quads ? 1 : (depth + kCompartments - 1) / kCompartments;

  for (std::size_t rowgroup = 0; rowgroup * quads_per_row < quads; ++rowgroup)
    for (std::size_t t = 0; t < tiles; ++t) {
      const std::size_t index = rowgroup * tiles + t;
      Round& round = alloc.round_for(index);
      const std::size_t row = index % kRows;
      const std::size_t len = std::min(kCompartments, depth - t * kCompartments);
      LoadRows load;
      load.row = row;
      for (std::size_t slot = 0; slot < quads_per_row; ++slot) {
        const std::size_t q = rowgroup * quads_per_row + slot;
        if (q >= quads) break;
        for (std::size_t c = 0; c < len; ++c) {
          const std::size_t comp = slot * kTreeWidth + c;
          load.mask |= 1u << comp;
          load.images[comp] = RowImage::pack(detail::stored_or_zero(store, 2 * q, t * kCompartments + c),
                                             detail::stored_or_zero(store, 2 * q + 1, t * kCompartments + c));
        }
      }
      round.loads.push_back(load);
      for (std::size_t stage = 0; stage < 2; ++stage) {
        ComputePass pass;
        pass.mode = MacroMode::Double;
        pass.adder = two_quads ? AdderConfig::Staged : AdderConfig::Combined;
        pass.stage = stage;
        MacroActivation act;
        act.row = row;
        for (std::size_t slot = 0; slot < quads_per_row; ++slot) {
          const std::size_t q = rowgroup * quads_per_row + slot;
          const std::size_t even = 4 * q + 2 * stage;
          if (q >= quads || even >= s.N) continue;
          const TreeSelect tree =
              two_quads ? (slot == 0 ? TreeSelect::Lower : TreeSelect::Upper) : TreeSelect::Both;
          act.lanes.push_back({slot * kTreeWidth, len, t * kCompartments, static_cast<int>(even),
                               static_cast<int>(even + 1)});
          act.outputs.push_back({2 * stage, tree, even});
          act.outputs.push_back({2 * stage + 1, tree, even + 1});
        }
        if (act.lanes.empty()) continue;
        pass.macros.push_back(std::move(act));
        round.passes.push_back(std::move(pass));
      }
    }
  sch.parallelism = detail::measure(sch.rounds);
  return sch;
}

// ---------------------------------------------------------------------------
// Dispatch by feature config

struct LayerWeights {
  std::optional<CompFilterStore> store;      // FCC layers
  std::optional<Weights<std::int8_t>> plain;  // INT8 weights the regular mode runs

  // Plain weights for the baseline path: the stored bank, or the biased-comp
  // bank the store represents.
  Weights<std::int8_t> regular_weights() const {
    if (plain) return *plain;
    require(store.has_value(), ErrorKind::Dimension, "layer has no weights");
    return reconstruct(*store).weights;
  }
};

inline bool runs_fcc(const LayerSpec& s, const FeatureConfig& f) {
  if (!s.uses_fcc()) return false;
  if (s.kind == LayerKind::Dw) return f.fcc_dw_dbis;
  return f.fcc_std_pw;
}

inline Schedule map_layer(const LayerSpec& s, const LayerWeights& w, const FeatureConfig& f) {
  f.validate();
  if (runs_fcc(s, f)) {
    require(w.store.has_value(), ErrorKind::Dimension, "layer '" + s.id + "' needs a comp store");
    if (s.kind == LayerKind::Dw) return map_dw(*w.store, s, {f.reconfig_unit});
    return map_std_pw(*w.store, s);
  }
  return map_regular(w.regular_weights(), s);
}

// ---------------------------------------------------------------------------
// Weight transfer and prefetch

inline constexpr std::size_t kWeightMemoryBytes = 256 * 1024;
inline constexpr std::size_t kMeanBytes = 2;  // int16 per pair
inline constexpr std::size_t kPingPongBufferBytes = 64 * 1024;

// Bytes moved from DRAM for one layer's weights.
inline std::size_t transferred_weight_bytes(const LayerSpec& s, bool fcc) {
  const std::size_t per_filter = s.filter_channels() * s.K * s.K;
  if (!fcc) return s.N * per_filter;
  const std::size_t half = (s.N + 1) / 2;
  return half * per_filter + kMeanBytes * half;
}

struct PrefetchEvent {
  enum class Kind { Load, Evict } kind = Kind::Load;
  std::size_t layer = 0;  // index into the network
  std::size_t chunk = 0;
  std::size_t bytes = 0;
  bool prefetch = false;  // issued while the previous layer computes
};

struct WeightMemoryModel {
  std::size_t capacity = kWeightMemoryBytes;
  std::vector<PrefetchEvent> events;
  std::vector<std::size_t> chunks_per_layer;
  std::vector<bool> streamed;  // layer did not fit and was split into chunks
  std::size_t peak_resident = 0;
};

// Streams each layer's stored weights through the weight memory. Layers that
// exceed capacity are split into chunks of at most half the capacity so the
// next chunk can load while the current one drains.
inline WeightMemoryModel plan_prefetch(const std::vector<std::size_t>& layer_bytes,
                                       std::size_t capacity = kWeightMemoryBytes,
                                       std::size_t min_tile_bytes = 2 * kCompartments) {
  require(capacity >= 2 * min_tile_bytes, ErrorKind::Precondition,
          "weight memory of " + std::to_string(capacity) + " bytes cannot hold two streamable tiles");
  WeightMemoryModel m;
  m.capacity = capacity;
  struct Resident {
    std::size_t layer, chunk, bytes;
  };
  std::vector<Resident> resident;  // oldest first
  std::size_t used = 0;
  for (std::size_t l = 0; l < layer_bytes.size(); ++l) {
    const std::size_t bytes = layer_bytes[l];
    const bool fits = bytes <= capacity;
    const std::size_t chunk_cap = fits ? std::max<std::size_t>(bytes, 1) : capacity / 2;
    const std::size_t chunks = fits ? 1 : (bytes + chunk_cap - 1) / chunk_cap;
    m.chunks_per_layer.push_back(chunks);
    m.streamed.push_back(!fits);
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t b = std::min(chunk_cap, bytes - c * chunk_cap);
      while (used + b > capacity) {
        const Resident r = resident.front();
        resident.erase(resident.begin());
        used -= r.bytes;
        m.events.push_back({PrefetchEvent::Kind::Evict, r.layer, r.chunk, r.bytes, false});
      }
      resident.push_back({l, c, b});
      used += b;
      m.peak_resident = std::max(m.peak_resident, used);
      m.events.push_back({PrefetchEvent::Kind::Load, l, c, b, l > 0 || c > 0});
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Debug text format: one step per line.

inline std::string to_text(const Schedule& sch) {
  std::ostringstream os;
  const auto& s = sch.layer;
  os << "schedule layer=" << s.id << " kind=" << to_string(s.kind) << " positions=" << s.positions()
     << " recover=" << (sch.recover ? 1 : 0) << " parallelism=" << to_string(sch.parallelism) << "\n";
  for (std::size_t r = 0; r < sch.rounds.size(); ++r) {
    const auto& round = sch.rounds[r];
    os << "round " << r << "\n";
    for (const auto& l : round.loads) {
      os << "load macro=" << l.macro << " row=" << l.row << " mask=0x" << std::hex << std::setw(8)
         << std::setfill('0') << l.mask << " images=";
      bool first = true;
      for (std::size_t c = 0; c < kCompartments; ++c) {
        if (!((l.mask >> c) & 1u)) continue;
        os << (first ? "" : ",") << std::setw(4) << l.images[c].bits;
        first = false;
      }
      os << std::dec << std::setfill(' ') << "\n";
    }
    for (const auto& p : round.passes) {
      os << "compute mode=" << to_string(p.mode) << " adder=" << to_string(p.adder) << " stage=" << p.stage;
      for (const auto& a : p.macros) {
        os << " | macro=" << a.macro << " row=" << a.row << " lanes=";
        for (const auto& l : a.lanes)
          os << "[" << l.first << "+" << l.length << "@" << l.element_begin << " inp=" << l.inp_source
             << " inn=" << l.inn_source << "]";
        os << " out=";
        for (const auto& o : a.outputs)
          os << "[u" << o.unit << ":"
             << (o.tree == TreeSelect::Both ? "both" : o.tree == TreeSelect::Lower ? "lower" : "upper")
             << "->" << o.channel << "]";
      }
      os << " x" << s.positions() << "\n";
    }
  }
  os << "drain channels=" << s.N << "\n";
  return os.str();
}

}  // namespace ddcpim
