#include <gtest/gtest.h>

#include "ddcpim/macro.hpp"
#include "testutil.hpp"

using namespace ddcpim;
using testutil::uniform;

TEST(Capacity, ThirtyTwoKbStoredSixtyFourLogical) {
  EXPECT_EQ(MacroState::kStoredBits, 32u * 1024u);
  EXPECT_EQ(MacroState::kLogicalWeightBits, 64u * 1024u);
  EXPECT_EQ(double(MacroState::kLogicalWeightBits) / MacroState::kStoredBits, 2.0);
}

TEST(WriteRow, FigureSevenPattern) {
  MacroState m;
  m.write_row(3, 10, RowImage{0x00FA});
  EXPECT_EQ(m.read_row(3, 10).bits, 0x00FA);
  EXPECT_EQ(m.read_row_complement(3, 10).bits, 0xFF05);
  EXPECT_EQ(m.read_row(3, 10).weight_a(), -6);
  EXPECT_EQ(m.read_row_complement(3, 10).weight_a(), 5);
}

TEST(WriteRow, ZerosComplementToOnes) {
  MacroState m;
  m.write_row(0, 0, RowImage{0});
  EXPECT_EQ(m.read_row_complement(0, 0).bits, 0xFFFF);
}

TEST(WriteRow, RandomRoundTrip) {
  MacroState m;
  std::vector<std::uint16_t> shadow(kCompartments * kRows, 0);
  for (int t = 0; t < 10000; ++t) {
    const auto c = static_cast<std::size_t>(uniform(0, 31));
    const auto r = static_cast<std::size_t>(uniform(0, 63));
    const auto v = static_cast<std::uint16_t>(uniform(0, 0xFFFF));
    m.write_row(c, r, RowImage{v});
    shadow[c * kRows + r] = v;
    const auto c2 = static_cast<std::size_t>(uniform(0, 31));
    const auto r2 = static_cast<std::size_t>(uniform(0, 63));
    ASSERT_EQ(m.read_row(c2, r2).bits, shadow[c2 * kRows + r2]);
  }
}

TEST(Modes, WriteOutsideNormalIsModeError) {
  MacroState m;
  m.set_mode(MacroMode::Double);
  try {
    m.write_row(0, 0, RowImage{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Mode);
  }
  m.set_mode(MacroMode::Normal);
  EXPECT_THROW(m.compute_regular(ActiveRows::uniform(0, 1), 1), Error);
}

TEST(ActiveRowsTest, SecondRowInCompartmentRejected) {
  ActiveRows a;
  a.activate(4, 1);
  try {
    a.activate(4, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Integrity);
  }
}

TEST(ComputeRegular, TruthTable) {
  MacroState m;
  m.write_row(0, 0, RowImage{0x0001});
  m.set_mode(MacroMode::Regular);
  const auto rows = ActiveRows::uniform(0, 1);
  EXPECT_TRUE(m.compute_regular(rows, 1).at(0, 0));   // Q=1 inp=1
  EXPECT_FALSE(m.compute_regular(rows, 1).at(0, 2));  // Q=0 inp=1
  EXPECT_FALSE(m.compute_regular(rows, 0).at(0, 0));  // inp=0
  // Q-bar path stays dark
  for (std::size_t k = 0; k < kColumns; ++k) EXPECT_FALSE(m.compute_regular(rows, 1).at(0, 2 * k + 1));
}

TEST(ComputeRegular, RandomMatchesSoftwareAnd) {
  MacroState m;
  for (std::size_t c = 0; c < kCompartments; ++c)
    for (std::size_t r = 0; r < kRows; ++r) m.write_row(c, r, RowImage{static_cast<std::uint16_t>(uniform(0, 0xFFFF))});
  std::vector<std::uint16_t> img(kCompartments * kRows);
  for (std::size_t c = 0; c < kCompartments; ++c)
    for (std::size_t r = 0; r < kRows; ++r) img[c * kRows + r] = m.peek(c, r).bits;
  m.set_mode(MacroMode::Regular);
  for (int t = 0; t < 500; ++t) {
    ActiveRows rows;
    std::vector<int> chosen(kCompartments, -1);
    for (std::size_t c = 0; c < kCompartments; ++c)
      if (uniform(0, 3)) {
        chosen[c] = uniform(0, 63);
        rows.activate(c, static_cast<std::size_t>(chosen[c]));
      }
    const auto inp = static_cast<std::uint32_t>(testutil::rng()());
    const BitMatrix out = m.compute_regular(rows, inp);
    for (std::size_t c = 0; c < kCompartments; ++c)
      for (std::size_t k = 0; k < kColumns; ++k) {
        const bool q = chosen[c] >= 0 && ((img[c * kRows + static_cast<std::size_t>(chosen[c])] >> k) & 1u);
        ASSERT_EQ(out.at(c, 2 * k), q && ((inp >> c) & 1u));
        ASSERT_FALSE(out.at(c, 2 * k + 1));
      }
  }
}

TEST(ComputeDouble, BothPathsContribute) {
  MacroState m;
  m.write_row(0, 0, RowImage{0x0001});
  m.set_mode(MacroMode::Double);
  const auto out = m.compute_double(ActiveRows::uniform(0, 1), 1, 1);
  EXPECT_TRUE(out.at(0, 0));   // Q=1
  EXPECT_FALSE(out.at(0, 1));
  EXPECT_FALSE(out.at(0, 2));  // Q=0 on column 1
  EXPECT_TRUE(out.at(0, 3));
}

TEST(ComputeDouble, EqualInputsReduceToTwoRegularRuns) {
  MacroState a, b;
  for (std::size_t c = 0; c < kCompartments; ++c) {
    const RowImage img{static_cast<std::uint16_t>(uniform(0, 0xFFFF))};
    a.write_row(c, 5, img);
    b.write_row(c, 5, img.complement());
  }
  a.set_mode(MacroMode::Double);
  const auto inp = static_cast<std::uint32_t>(testutil::rng()());
  const auto rows = ActiveRows::uniform(5, 0xFFFFFFFFu);
  const auto d = a.compute_double(rows, inp, inp);
  a.set_mode(MacroMode::Regular);
  b.set_mode(MacroMode::Regular);
  const auto q = a.compute_regular(rows, inp);
  const auto qb = b.compute_regular(rows, inp);
  for (std::size_t k = 0; k < kColumns; ++k) {
    EXPECT_EQ(d.lanes[2 * k], q.lanes[2 * k]);
    EXPECT_EQ(d.lanes[2 * k + 1], qb.lanes[2 * k]);
  }
}

TEST(ComputeDouble, RandomMatchesSoftware) {
  MacroState m;
  std::vector<std::uint16_t> img(kCompartments);
  for (std::size_t c = 0; c < kCompartments; ++c) {
    img[c] = static_cast<std::uint16_t>(uniform(0, 0xFFFF));
    m.write_row(c, 63, RowImage{img[c]});
  }
  m.set_mode(MacroMode::Double);
  for (int t = 0; t < 1000; ++t) {
    const auto inp = static_cast<std::uint32_t>(testutil::rng()());
    const auto inn = static_cast<std::uint32_t>(testutil::rng()());
    const auto out = m.compute_double(ActiveRows::uniform(63, 0xFFFFFFFFu), inp, inn);
    for (std::size_t c = 0; c < kCompartments; ++c)
      for (std::size_t k = 0; k < kColumns; ++k) {
        const bool q = (img[c] >> k) & 1u;
        ASSERT_EQ(out.at(c, 2 * k), q && ((inp >> c) & 1u));
        ASSERT_EQ(out.at(c, 2 * k + 1), !q && ((inn >> c) & 1u));
      }
  }
}

TEST(Adder, AllOnesCombinedIsThirtyTwo) {
  BitMatrix m;
  m.lanes.fill(0xFFFFFFFFu);
  const auto r = adder_reduce(m, AdderConfig::Combined);
  for (std::size_t u = 0; u < kAdderUnits; ++u)
    for (std::size_t b = 0; b < 8; ++b) EXPECT_EQ(r.sum(u, b, TreeSelect::Both), 32u);
}

TEST(Adder, SplitCountsNineDwCompartments) {
  BitMatrix m;
  m.lanes.fill(0x1FFu);  // compartments 0..8
  const auto r = adder_reduce(m, AdderConfig::Split);
  EXPECT_EQ(r.sum(0, 0, TreeSelect::Lower), 9u);
  EXPECT_EQ(r.sum(0, 0, TreeSelect::Upper), 0u);
  EXPECT_THROW(r.sum(0, 0, TreeSelect::Both), Error);
}

TEST(Adder, RandomMatchesPopcountOracle) {
  for (int t = 0; t < 1000; ++t) {
    BitMatrix m;
    for (auto& l : m.lanes) l = static_cast<std::uint32_t>(testutil::rng()());
    const auto cfg = std::array{AdderConfig::Combined, AdderConfig::Split, AdderConfig::Staged}[t % 3];
    const std::size_t stage = static_cast<std::size_t>(t / 3 % 2);
    const auto r = adder_reduce(m, cfg, stage);
    for (std::size_t u = 0; u < kAdderUnits; ++u) {
      const bool live = cfg != AdderConfig::Staged || u / 2 == stage;
      ASSERT_EQ(r.live[u], live);
      if (!live) continue;
      for (std::size_t b = 0; b < 8; ++b) {
        // unit u reads weight bit b of slot u/2 on path u%2
        const std::uint32_t lane = m.lanes[2 * ((u / 2) * 8 + b) + (u % 2)];
        if (cfg == AdderConfig::Combined) {
          ASSERT_EQ(r.sum(u, b, TreeSelect::Both), testutil::popcount_oracle(lane));
        } else {
          ASSERT_EQ(r.sum(u, b, TreeSelect::Lower), testutil::popcount_oracle(lane & 0xFFFFu));
          ASSERT_EQ(r.sum(u, b, TreeSelect::Upper), testutil::popcount_oracle(lane >> 16));
        }
      }
    }
  }
}

TEST(Adder, ReconfigurableUnitAlternatesStages) {
  ReconfigurableUnit ru;
  BitMatrix m;
  m.lanes.fill(1);
  EXPECT_TRUE(ru.reduce(m, AdderConfig::Staged).live[0]);
  EXPECT_TRUE(ru.reduce(m, AdderConfig::Staged).live[2]);
  EXPECT_TRUE(ru.reduce(m, AdderConfig::Staged).live[1]);
  EXPECT_FALSE(ru.reduce(m, AdderConfig::Staged).live[0]);
}
