#include <gtest/gtest.h>

#include "ddcpim/oracle.hpp"
#include "testutil.hpp"

using namespace ddcpim;
using testutil::layer;

TEST(ConvDirect, ScalarProduct) {
  const auto s = layer(LayerKind::Pw, 1, 1, 1, 1, 1, 1, 0, false);
  ActivationTensor in({1, 1, 1});
  in.storage()[0] = 2;
  Weights<std::int8_t> w({1, 1, 1, 1});
  w.storage()[0] = 5;
  EXPECT_EQ(conv_direct(in, w, s).storage()[0], 10);
}

TEST(ConvDirect, IdentityKernel) {
  const auto s = layer(LayerKind::Dw, 5, 4, 3, 3, 3, 1, 1, false);
  const auto in = testutil::random_input(3, 5, 4);
  Weights<std::int8_t> w({3, 1, 3, 3});
  for (std::size_t n = 0; n < 3; ++n) w(n, 0, 1, 1) = 1;
  const auto out = conv_direct(in, w, s);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(out.storage()[i], in.storage()[i]);
}

TEST(ConvDirect, MatchesNaiveLoops) {
  for (int t = 0; t < 50; ++t) {
    const auto s = layer(LayerKind::Std, 8, 8, 4, 8, 3, 1 + t % 2, t % 2);
    const auto in = testutil::random_input(4, 8, 8);
    const auto w = testutil::random_int8({8, 4, 3, 3}, -128, 127);
    const auto out = conv_direct(in, w, s);
    const auto ref = testutil::naive_conv(in, w, s);
    ASSERT_EQ(out.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_EQ(out.storage()[i], ref[i]);
  }
}

TEST(WindowSum, CountsWindowElements) {
  const auto s = layer(LayerKind::Std, 3, 3, 1, 2, 3);
  ActivationTensor in({1, 3, 3}, 1);
  EXPECT_EQ(window_sum(in, s).storage(), std::vector<std::int32_t>{9});
  ActivationTensor z({1, 3, 3}, 0);
  EXPECT_EQ(window_sum(z, s).storage(), std::vector<std::int32_t>{0});
}

TEST(WindowSum, EqualsAllOnesFilter) {
  for (auto kind : {LayerKind::Std, LayerKind::Pw, LayerKind::Dw}) {
    const auto s = testutil::random_layer(kind);
    const auto in = testutil::random_input(s.C, s.H, s.W);
    Weights<std::int8_t> ones({s.N, s.filter_channels(), s.K, s.K}, 1);
    const auto direct = conv_direct(in, ones, s);
    const auto sums = window_sum(in, s);
    for (std::size_t n = 0; n < s.N; ++n)
      for (std::size_t p = 0; p < s.positions(); ++p)
        ASSERT_EQ(direct.storage()[n * s.positions() + p],
                  sums.storage()[(kind == LayerKind::Dw ? n : 0) * s.positions() + p]);
  }
}

TEST(Recover, ScalarExample) {
  const auto s = layer(LayerKind::Pw, 1, 1, 1, 2, 1);
  OutputTensor comp({2, 1, 1});
  comp.storage() = {8, 0};
  OutputTensor sums({1, 1, 1});
  sums.storage() = {2};
  const auto out = recover(comp, sums, IntPairMeans{{1}}, s);
  EXPECT_EQ(out.storage()[0], 10);
  // conv with f_bc = 5 on I = 2
  ActivationTensor in({1, 1, 1});
  in.storage()[0] = 2;
  Weights<std::int8_t> w({2, 1, 1, 1});
  w.storage() = {5, 1};
  EXPECT_EQ(conv_direct(in, w, s).storage()[0], 10);
}

TEST(Recover, ZeroMeansIsIdentity) {
  const auto s = layer(LayerKind::Std, 4, 4, 2, 4, 3, 1, 1);
  OutputTensor comp({4, 4, 4});
  for (auto& v : comp.storage()) v = testutil::uniform(-1000, 1000);
  OutputTensor sums({1, 4, 4}, 77);
  EXPECT_EQ(recover(comp, sums, IntPairMeans{{0, 0}}, s), comp);
}

TEST(Recover, RandomLayersMatchConvDirect) {
  for (int t = 0; t < 1000; ++t) {
    const LayerKind kind = std::array{LayerKind::Std, LayerKind::Pw, LayerKind::Dw}[t % 3];
    auto s = testutil::random_layer(kind);
    if (kind == LayerKind::Std && t % 2) s.K = 1, s.pad = 0;
    s.C = std::min<std::size_t>(s.C, 16);
    if (kind == LayerKind::Dw) s.N = s.C = 2 * std::max<std::size_t>(1, s.C / 2);
    FloatFilterBank b = testutil::float_bank(s.N, s.filter_channels(), s.K);
    const auto r = run_fcc(b, {{}, true});
    const auto in = testutil::random_input(s.C, s.H, s.W);
    const auto comp = conv_direct(in, comp_weights(r.store), s);
    const auto out = recover(comp, window_sum(in, s), r.store.means, s);
    ASSERT_EQ(out, conv_direct(in, r.biased_comp, s)) << to_string(kind) << " t=" << t;
  }
}

TEST(Validate, RejectsBadSpecs) {
  auto expect_kind = [](LayerSpec s, ErrorKind k) {
    try {
      validate(s);
      ADD_FAILURE() << "accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), k);
    }
  };
  expect_kind(layer(LayerKind::Std, 4, 4, 2, 3, 3), ErrorKind::Pairing);
  expect_kind(layer(LayerKind::Pw, 4, 4, 2, 4, 3), ErrorKind::Dimension);
  expect_kind(layer(LayerKind::Dw, 4, 4, 2, 4, 3), ErrorKind::Dimension);
  expect_kind(layer(LayerKind::Fc, 2, 1, 2, 4, 1), ErrorKind::Dimension);
  expect_kind(layer(LayerKind::Std, 2, 2, 1, 2, 3), ErrorKind::Dimension);
  EXPECT_NO_THROW(validate(layer(LayerKind::Std, 4, 4, 2, 3, 3, 1, 0, false)));
}
