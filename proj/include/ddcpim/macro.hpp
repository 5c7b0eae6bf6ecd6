#pragma once

// Behavioral model of one PIM macro: 32 compartments x 64 rows x 16 columns
// of 6T cells. Only Q is stored; Q-bar is derived as its negation whenever the
// double computing mode reads it.

#include <array>
#include <bit>
#include <cstdint>
#include <string>

#include "ddcpim/core.hpp"

namespace ddcpim {

inline constexpr std::size_t kCompartments = 32;
inline constexpr std::size_t kRows = 64;
inline constexpr std::size_t kColumns = 16;
inline constexpr std::size_t kLanes = 2 * kColumns;  // Q and Q-bar path per column
inline constexpr std::size_t kTreeWidth = 16;        // compartments per adder tree
inline constexpr std::size_t kAdderUnits = 4;
inline constexpr std::size_t kMacros = 4;

enum class MacroMode { Normal, Regular, Double };

inline const char* to_string(MacroMode m) {
  switch (m) {
    case MacroMode::Normal: return "normal";
    case MacroMode::Regular: return "regular";
    case MacroMode::Double: return "double";
  }
  return "?";
}

// Two stored 8-bit weights in one compartment row: weight A in bits 0..7,
// weight B in bits 8..15, each LSB first.
struct RowImage {
  std::uint16_t bits = 0;

  static constexpr RowImage pack(std::int8_t a, std::int8_t b) {
    return RowImage{static_cast<std::uint16_t>(bits_of(a) | (bits_of(b) << 8))};
  }
  constexpr std::int8_t weight_a() const { return from_bits(static_cast<std::uint8_t>(bits & 0xFF)); }
  constexpr std::int8_t weight_b() const { return from_bits(static_cast<std::uint8_t>(bits >> 8)); }
  constexpr RowImage complement() const { return RowImage{static_cast<std::uint16_t>(~bits)}; }
  constexpr bool bit(std::size_t col) const { return (bits >> col) & 1u; }

  friend constexpr bool operator==(RowImage, RowImage) = default;
};

// Row driven in each compartment during one compute cycle; -1 = idle.
class ActiveRows {
 public:
  ActiveRows() { rows_.fill(-1); }

  static ActiveRows uniform(std::size_t row, std::uint32_t compartment_mask) {
    ActiveRows a;
    for (std::size_t c = 0; c < kCompartments; ++c)
      if ((compartment_mask >> c) & 1u) a.activate(c, row);
    return a;
  }

  void activate(std::size_t compartment, std::size_t row) {
    require(compartment < kCompartments && row < kRows, ErrorKind::Range, "active row out of range");
    require(rows_[compartment] < 0, ErrorKind::Integrity,
            "compartment " + std::to_string(compartment) + " already has an active row");
    rows_[compartment] = static_cast<std::int16_t>(row);
  }

  int row(std::size_t compartment) const { return rows_.at(compartment); }

  std::uint32_t mask() const {
    std::uint32_t m = 0;
    for (std::size_t c = 0; c < kCompartments; ++c)
      if (rows_[c] >= 0) m |= 1u << c;
    return m;
  }

 private:
  std::array<std::int16_t, kCompartments> rows_;
};

// Compute-cycle output: 32 lanes, each a 32-bit mask over compartments.
// Lane 2k is the Q path of column k, lane 2k+1 the Q-bar path.
struct BitMatrix {
  std::array<std::uint32_t, kLanes> lanes{};

  bool at(std::size_t compartment, std::size_t lane) const { return (lanes.at(lane) >> compartment) & 1u; }

  friend bool operator==(const BitMatrix&, const BitMatrix&) = default;
};

class MacroState {
 public:
  static constexpr std::size_t kStoredBits = kCompartments * kRows * kColumns;  // 32 Kb
  static constexpr std::size_t kLogicalWeightBits = 2 * kStoredBits;           // 64 Kb via Q-bar

  MacroMode mode() const { return mode_; }
  void set_mode(MacroMode m) { mode_ = m; }

  void write_row(std::size_t compartment, std::size_t row, RowImage image) {
    require(mode_ == MacroMode::Normal, ErrorKind::Mode,
            std::string("write_row in ") + to_string(mode_) + " computing mode");
    check_index(compartment, row);
    const std::uint32_t bit = 1u << compartment;
    for (std::size_t k = 0; k < kColumns; ++k) {
      if (image.bit(k))
        q_[row][k] |= bit;
      else
        q_[row][k] &= ~bit;
    }
  }

  RowImage read_row(std::size_t compartment, std::size_t row) const {
    require(mode_ == MacroMode::Normal, ErrorKind::Mode,
            std::string("read_row in ") + to_string(mode_) + " computing mode");
    return peek(compartment, row);
  }

  // Q-bar image of a row; never stored.
  RowImage read_row_complement(std::size_t compartment, std::size_t row) const {
    return read_row(compartment, row).complement();
  }

  // Unchecked debug access, independent of mode.
  RowImage peek(std::size_t compartment, std::size_t row) const {
    check_index(compartment, row);
    std::uint16_t v = 0;
    for (std::size_t k = 0; k < kColumns; ++k)
      v |= static_cast<std::uint16_t>(((q_[row][k] >> compartment) & 1u) << k);
    return RowImage{v};
  }

  // Q & INP on every column; the Q-bar path stays disabled.
  BitMatrix compute_regular(const ActiveRows& active, std::uint32_t inp) const {
    require(mode_ == MacroMode::Regular, ErrorKind::Mode,
            std::string("compute_regular in ") + to_string(mode_) + " mode");
    return compute(active, inp, 0, false);
  }

  // Q & INP on even lanes, Q-bar & INN on odd lanes.
  BitMatrix compute_double(const ActiveRows& active, std::uint32_t inp, std::uint32_t inn) const {
    require(mode_ == MacroMode::Double, ErrorKind::Mode,
            std::string("compute_double in ") + to_string(mode_) + " mode");
    return compute(active, inp, inn, true);
  }

  // Column-mask view used by dumps: bit c of column(row, k) is Q of compartment c.
  std::uint32_t column(std::size_t row, std::size_t k) const { return q_.at(row).at(k); }

 private:
  static void check_index(std::size_t compartment, std::size_t row) {
    require(compartment < kCompartments, ErrorKind::Range, "compartment " + std::to_string(compartment));
    require(row < kRows, ErrorKind::Range, "row " + std::to_string(row));
  }

  BitMatrix compute(const ActiveRows& active, std::uint32_t inp, std::uint32_t inn, bool dual) const {
    BitMatrix out;
    std::uint32_t pending = active.mask();
    while (pending) {
      const std::size_t first = static_cast<std::size_t>(std::countr_zero(pending));
      const int row = active.row(first);
      std::uint32_t same = 0;
      for (std::uint32_t m = pending; m; m &= m - 1) {
        const std::size_t c = static_cast<std::size_t>(std::countr_zero(m));
        if (active.row(c) == row) same |= 1u << c;
      }
      pending &= ~same;
      const auto& cols = q_[static_cast<std::size_t>(row)];
      for (std::size_t k = 0; k < kColumns; ++k) {
        out.lanes[2 * k] |= cols[k] & same & inp;
        if (dual) out.lanes[2 * k + 1] |= ~cols[k] & same & inn;
      }
    }
    return out;
  }

  std::array<std::array<std::uint32_t, kColumns>, kRows> q_{};
  MacroMode mode_ = MacroMode::Normal;
};

// ---------------------------------------------------------------------------
// Reconfigurable unit: four adder units of two adder trees each. Unit u reads
// weight slot u/2 (A or B) on path u%2 (Q or Q-bar); tree t covers
// compartments 16t..16t+15.

enum class AdderConfig { Combined, Split, Staged };

inline const char* to_string(AdderConfig c) {
  switch (c) {
    case AdderConfig::Combined: return "combined";
    case AdderConfig::Split: return "split";
    case AdderConfig::Staged: return "staged";
  }
  return "?";
}

enum class TreeSelect { Both, Lower, Upper };

inline constexpr std::size_t unit_lane(std::size_t unit, std::size_t bit) {
  return 2 * ((unit / 2) * 8 + bit) + unit % 2;
}

struct AdderOutput {
  AdderConfig config = AdderConfig::Combined;
  std::array<bool, kAdderUnits> live{};
  // [unit][tree][bit] popcounts
  std::array<std::array<std::array<std::uint16_t, 8>, 2>, kAdderUnits> trees{};

  std::uint32_t sum(std::size_t unit, std::size_t bit, TreeSelect sel) const {
    require(unit < kAdderUnits && bit < 8, ErrorKind::Range, "adder output index");
    if (config == AdderConfig::Combined) {
      require(sel == TreeSelect::Both, ErrorKind::Config, "combined adder exposes merged trees only");
      return trees[unit][0][bit] + trees[unit][1][bit];
    }
    require(sel != TreeSelect::Both, ErrorKind::Config, "split adder exposes individual trees only");
    return trees[unit][sel == TreeSelect::Upper ? 1 : 0][bit];
  }
};

inline AdderOutput adder_reduce(const BitMatrix& m, AdderConfig config, std::size_t stage = 0) {
  AdderOutput out;
  out.config = config;
  for (std::size_t u = 0; u < kAdderUnits; ++u)
    out.live[u] = config != AdderConfig::Staged || u / 2 == stage % 2;
  for (std::size_t u = 0; u < kAdderUnits; ++u) {
    if (!out.live[u]) continue;
    for (std::size_t b = 0; b < 8; ++b) {
      const std::uint32_t lane = m.lanes[unit_lane(u, b)];
      out.trees[u][0][b] = static_cast<std::uint16_t>(std::popcount(lane & 0x0000FFFFu));
      out.trees[u][1][b] = static_cast<std::uint16_t>(std::popcount(lane & 0xFFFF0000u));
    }
  }
  return out;
}

// Staged mode alternates the live pair of adder units on every call.
class ReconfigurableUnit {
 public:
  AdderOutput reduce(const BitMatrix& m, AdderConfig config) {
    if (config != AdderConfig::Staged) return adder_reduce(m, config);
    AdderOutput out = adder_reduce(m, config, stage_);
    stage_ ^= 1;
    return out;
  }
  std::size_t stage() const { return stage_; }
  void reset() { stage_ = 0; }

 private:
  std::size_t stage_ = 0;
};

}  // namespace ddcpim
