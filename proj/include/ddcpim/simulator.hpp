#pragma once

// Executes a Schedule through four MacroState instances, the reconfigurable
// unit, shift & add and the ARU.

#include <array>
#include <vector>

#include "ddcpim/datapath.hpp"
#include "ddcpim/macro.hpp"
#include "ddcpim/mapper.hpp"

namespace ddcpim {

struct ExecutionStats {
  std::size_t load_steps = 0;
  std::size_t compute_cycles = 0;  // one per bit plane per pass
  std::size_t passes = 0;
};

class Accelerator {
 public:
  std::array<MacroState, kMacros>& macros() { return macros_; }
  const std::array<MacroState, kMacros>& macros() const { return macros_; }
  const ExecutionStats& stats() const { return stats_; }

  OutputTensor run(const Schedule& sch, const ActivationTensor& input) {
    const LayerSpec& s = sch.layer;
    const Im2Col cols = im2col(input, s);
    const OutputTensor sums = window_sums(cols, s);
    AccumulateRecoverUnit aru(s);
    std::vector<BitSerialStream> streams(cols.groups());

    for (const Round& round : sch.rounds) {
      for (auto& m : macros_) m.set_mode(MacroMode::Normal);
      for (const LoadRows& l : round.loads) {
        for (std::size_t c = 0; c < kCompartments; ++c)
          if ((l.mask >> c) & 1u) macros_.at(l.macro).write_row(c, l.row, l.images[c]);
        ++stats_.load_steps;
      }
      for (std::size_t p = 0; p < s.positions(); ++p) {
        for (std::size_t g = 0; g < cols.groups(); ++g) streams[g] = bit_serialize(cols.vector(p, g));
        std::size_t expected_stage = 0;
        for (const ComputePass& pass : round.passes) {
          if (pass.adder == AdderConfig::Staged) {
            require(pass.stage == expected_stage, ErrorKind::Integrity, "staged passes must alternate");
            expected_stage ^= 1;
          }
          run_pass(pass, streams, p, aru);
        }
      }
    }
    return aru.merge(sums, sch.means, sch.recover);
  }

 private:
  static std::uint32_t lane_bits(const std::vector<BitSerialStream>& streams, int source,
                                 const LaneBinding& l, std::size_t k) {
    if (source < 0) return 0;
    require(l.element_begin % kCompartments == 0, ErrorKind::Integrity, "lane must start on a 32-element tile");
    const std::uint32_t word = streams.at(static_cast<std::size_t>(source)).word(k, l.element_begin / kCompartments);
    const std::uint32_t keep = l.length >= 32 ? 0xFFFFFFFFu : ((1u << l.length) - 1u);
    return (word & keep) << l.first;
  }

  void run_pass(const ComputePass& pass, const std::vector<BitSerialStream>& streams, std::size_t position,
                AccumulateRecoverUnit& aru) {
    ++stats_.passes;
    for (const MacroActivation& act : pass.macros) {
      MacroState& macro = macros_.at(act.macro);
      macro.set_mode(pass.mode);
      const ActiveRows rows = ActiveRows::uniform(act.row, act.compartment_mask());
      std::vector<BitSums> sums(act.outputs.size(), BitSums{});
      for (std::size_t k = 0; k < 8; ++k) {
        std::uint32_t inp = 0, inn = 0;
        for (const LaneBinding& l : act.lanes) {
          inp |= lane_bits(streams, l.inp_source, l, k);
          inn |= lane_bits(streams, l.inn_source, l, k);
        }
        const BitMatrix bits = pass.mode == MacroMode::Double ? macro.compute_double(rows, inp, inn)
                                                              : macro.compute_regular(rows, inp);
        const AdderOutput reduced = adder_reduce(bits, pass.adder, pass.stage);
        for (std::size_t o = 0; o < act.outputs.size(); ++o) {
          const OutputBinding& ob = act.outputs[o];
          require(reduced.live[ob.unit], ErrorKind::Integrity, "output bound to an idle adder unit");
          for (std::size_t b = 0; b < 8; ++b) sums[o][k][b] = reduced.sum(ob.unit, b, ob.tree);
        }
      }
      for (std::size_t o = 0; o < act.outputs.size(); ++o)
        aru.accumulate(act.outputs[o].channel, position, shift_add(sums[o]));
    }
    stats_.compute_cycles += 8;
  }

  std::array<MacroState, kMacros> macros_{};
  ExecutionStats stats_;
};

inline OutputTensor execute(const Schedule& sch, const ActivationTensor& input) {
  Accelerator acc;
  return acc.run(sch, input);
}

}  // namespace ddcpim
