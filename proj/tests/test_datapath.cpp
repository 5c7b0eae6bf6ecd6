#include <gtest/gtest.h>

#include "ddcpim/datapath.hpp"
#include "testutil.hpp"

using namespace ddcpim;
using testutil::layer;
using testutil::uniform;

TEST(Im2ColTest, PointwiseIsReshape) {
  const auto s = layer(LayerKind::Pw, 3, 4, 5, 2, 1);
  const auto in = testutil::random_input(5, 3, 4);
  const auto cols = im2col(in, s);
  for (std::size_t p = 0; p < 12; ++p)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(cols.vector(p)[c], in.storage()[c * 12 + p]);
}

TEST(Im2ColTest, PaddingCounts) {
  const auto s = layer(LayerKind::Std, 3, 3, 1, 2, 3, 1, 1);
  const ActivationTensor in({1, 3, 3}, 1);
  const auto cols = im2col(in, s);
  auto ones = [&](std::size_t p) {
    int n = 0;
    for (auto v : cols.vector(p)) n += v;
    return n;
  };
  EXPECT_EQ(ones(4), 9);
  EXPECT_EQ(ones(0), 4);
  EXPECT_EQ(ones(2), 4);
  EXPECT_EQ(ones(6), 4);
  EXPECT_EQ(ones(8), 4);
}

TEST(Im2ColTest, ProductWithFiltersEqualsConv) {
  for (auto kind : {LayerKind::Std, LayerKind::Pw, LayerKind::Dw, LayerKind::Fc}) {
    for (int t = 0; t < 20; ++t) {
      const auto s = testutil::random_layer(kind);
      const auto in = testutil::random_input(s.C, s.H, s.W);
      const auto w = testutil::random_int8({s.N, s.filter_channels(), s.K, s.K}, -128, 127);
      const auto cols = im2col(in, s);
      const auto ref = conv_direct(in, w, s);
      const std::size_t len = s.depth();
      for (std::size_t n = 0; n < s.N; ++n)
        for (std::size_t p = 0; p < s.positions(); ++p) {
          long long acc = 0;
          const auto v = cols.vector(p, kind == LayerKind::Dw ? n : 0);
          for (std::size_t e = 0; e < len; ++e) acc += v[e] * w.storage()[n * len + e];
          ASSERT_EQ(acc, ref.storage()[n * s.positions() + p]);
        }
    }
  }
}

TEST(BitSerial, MinusThree) {
  const std::int8_t v[] = {-3};
  const auto s = bit_serialize(v);
  const int expect[] = {1, 0, 1, 1, 1, 1, 1, 1};
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(s.bit(k, 0), expect[k] == 1);
  EXPECT_EQ(bit_deserialize(s), std::vector<int>{-3});
}

TEST(BitSerial, ZeroHasNoBits) {
  const std::int8_t v[] = {0, 0, 0};
  const auto s = bit_serialize(v);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(s.word(k, 0), 0u);
}

TEST(BitSerial, RandomRoundTrip) {
  for (int t = 0; t < 200; ++t) {
    std::vector<std::int8_t> v(static_cast<std::size_t>(uniform(1, 300)));
    for (auto& x : v) x = static_cast<std::int8_t>(uniform(-128, 127));
    const auto back = bit_deserialize(bit_serialize(v));
    for (std::size_t i = 0; i < v.size(); ++i) ASSERT_EQ(back[i], v[i]);
  }
}

namespace {

// Bit-plane sums of a dot product computed from raw bits.
BitSums plane_sums(const std::vector<std::int8_t>& x, const std::vector<std::int8_t>& w) {
  BitSums s{};
  for (std::size_t e = 0; e < x.size(); ++e)
    for (std::size_t k = 0; k < 8; ++k)
      for (std::size_t b = 0; b < 8; ++b)
        s[k][b] += ((bits_of(x[e]) >> k) & 1u) & ((bits_of(w[e]) >> b) & 1u);
  return s;
}

}  // namespace

TEST(ShiftAdd, UnitProduct) {
  EXPECT_EQ(shift_add(plane_sums({1}, {1})), 1);
  EXPECT_EQ(shift_add(plane_sums({-1}, {1})), -1);
}

TEST(ShiftAdd, RandomDotProducts) {
  for (int t = 0; t < 2000; ++t) {
    const auto n = static_cast<std::size_t>(uniform(1, 512));
    std::vector<std::int8_t> x(n), w(n);
    std::int32_t dot = 0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<std::int8_t>(uniform(-128, 127));
      w[i] = static_cast<std::int8_t>(uniform(-128, 127));
      dot += x[i] * w[i];
    }
    ASSERT_EQ(shift_add(plane_sums(x, w)), dot);
  }
}

TEST(Aru, DisabledIsIdentity) {
  const auto s = layer(LayerKind::Pw, 2, 2, 1, 2, 1);
  OutputTensor ps({2, 2, 2});
  for (auto& v : ps.storage()) v = uniform(-50, 50);
  EXPECT_EQ(aru_merge(ps, OutputTensor({1, 2, 2}, 9), IntPairMeans{{3}}, false, s), ps);
}

TEST(Aru, ScalarExample) {
  const auto s = layer(LayerKind::Pw, 1, 1, 1, 2, 1);
  AccumulateRecoverUnit aru(s);
  aru.accumulate(0, 0, 5);
  aru.accumulate(0, 0, 3);
  const auto out = aru.merge(OutputTensor({1, 1, 1}, 2), IntPairMeans{{1}}, true);
  EXPECT_EQ(out.storage()[0], 10);
}

TEST(WindowSums, MatchOracle) {
  for (auto kind : {LayerKind::Std, LayerKind::Pw, LayerKind::Dw}) {
    const auto s = testutil::random_layer(kind);
    const auto in = testutil::random_input(s.C, s.H, s.W);
    EXPECT_EQ(window_sums(im2col(in, s), s), window_sum(in, s));
  }
}
