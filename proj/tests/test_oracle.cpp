#include <gtest/gtest.h>

#include "braintta/oracle.hpp"
#include "braintta/verify.hpp"

using namespace braintta;

namespace {

LayerDesc conv(MacMode mode, LayerShape s) {
  LayerDesc d;
  d.kind = LayerKind::Conv;
  d.mode = mode;
  d.shape = s;
  return d;
}

}  // namespace

TEST(ConvRef, AllOnesWindow) {
  const auto d = conv(MacMode::T, {3, 3, 1, 1, 3, 3, 1, 0});
  const std::vector<int> ifm(9, 1), w(9, 1);
  EXPECT_EQ(oracle::conv_ref(d, ifm, w, {}), std::vector<std::int32_t>{9});
  EXPECT_EQ(oracle::conv_ref(d, ifm, w, {-4}), std::vector<std::int32_t>{5});
}

TEST(ConvRef, BinaryPaddingIsMinusOne) {
  // corner output sees 4 real inputs and 5 padded positions
  const std::vector<int> ifm(9, 1), w(9, 1);
  const auto b = oracle::conv_ref(conv(MacMode::B, {3, 3, 1, 1, 3, 3, 1, 1}), ifm, w, {});
  const auto t = oracle::conv_ref(conv(MacMode::T, {3, 3, 1, 1, 3, 3, 1, 1}), ifm, w, {});
  ASSERT_EQ(b.size(), 9u);
  EXPECT_EQ(b[0], 4 - 5);
  EXPECT_EQ(t[0], 4);
  EXPECT_EQ(b[4], 9);
  EXPECT_EQ(t[1], 6);
}

TEST(ConvRef, StrideAndChannelOrder) {
  // H=1, W=4, C=2, M=2, S=2, stride 2: two outputs, channel innermost
  const auto d = conv(MacMode::I8, {4, 1, 2, 2, 1, 2, 2, 0});
  const std::vector<int> ifm{1, 2, 3, 4, 5, 6, 7, 8};
  const std::vector<int> w{1, 0, 0, 0,   // m0 picks (s0, c0)
                           0, 0, 0, 1};  // m1 picks (s1, c1)
  EXPECT_EQ(oracle::conv_ref(d, ifm, w, {}), (std::vector<std::int32_t>{1, 4, 5, 8}));
}

TEST(FcRef, DotProducts) {
  LayerDesc d;
  d.kind = LayerKind::Fc;
  d.mode = MacMode::I8;
  d.shape = {1, 1, 3, 2, 1, 1, 1, 0};
  EXPECT_EQ(oracle::fc_ref(d, {1, -2, 3}, {1, 1, 1, -128, 0, 127}, {10, 0}), (std::vector<std::int32_t>{12, 253}));
}

TEST(DwconvRef, PerChannelWindow) {
  LayerDesc d;
  d.kind = LayerKind::DwConv;
  d.mode = MacMode::T;
  d.shape = {2, 2, 2, 2, 2, 2, 1, 0};
  const std::vector<int> ifm{1, 0, -1, 1, 1, 1, 0, -1};  // (y,x,c)
  const std::vector<int> w{1, 1, 1, 1, 1, -1, 1, -1};    // (c,r,s)
  EXPECT_EQ(oracle::dwconv_ref(d, ifm, w, {}), (std::vector<std::int32_t>{1, 1}));
}

TEST(ResidualRef, WidthSemantics) {
  EXPECT_EQ(oracle::residual_ref(funits::WidthMode::E16, {30000, -30000, 5}, {30000, -30000, -9}),
            (std::vector<std::int32_t>{32767, -32768, -4}));
  EXPECT_EQ(oracle::residual_ref(funits::WidthMode::E32, {2147483647}, {1}),
            (std::vector<std::int32_t>{std::numeric_limits<std::int32_t>::min()}));
}

TEST(RequantRef, Int8RoundingAndClamp) {
  const std::vector<QuantParams> q{{3, 2, 5, 0}};
  EXPECT_EQ(oracle::requant_ref(QuantTarget::I8, q, 32, {100, -10, 1000, -1000, 2}, false),
            (std::vector<std::int32_t>{80, -3, 127, -128, 7}));
  EXPECT_EQ(oracle::rescale(-6, 1, 2), -2);
  EXPECT_EQ(oracle::rescale(-5, 1, 2), -1);
}

TEST(RequantRef, BinaryTernaryAndGroups) {
  std::vector<QuantParams> q(2);
  q[0].threshold = 0;
  q[1].threshold = 10;
  std::vector<std::int32_t> x(64, 5);
  x[0] = -1;
  const auto b = oracle::requant_ref(QuantTarget::B, q, 64, x, true);
  EXPECT_EQ(b[0], -1);
  EXPECT_EQ(b[1], 1);
  EXPECT_EQ(b[32], -1);
  const auto t = oracle::requant_ref(QuantTarget::T, {QuantParams{1, 0, 0, 4}}, 32, {5, 4, -4, -5}, true);
  EXPECT_EQ(t, (std::vector<std::int32_t>{1, 0, 0, -1}));
  // 16-bit read saturates before thresholding
  EXPECT_EQ(oracle::requant_ref(QuantTarget::None, {QuantParams{}}, 32, {70000}, true), std::vector<std::int32_t>{32767});
}

TEST(Compare, FlippedOutputBitIsCaught) {
  LayerDesc d = conv(MacMode::B, {4, 4, 32, 32, 3, 3, 1, 1});
  const auto m = default_config();
  const auto ok = verify_layer(d, m, 3);
  ASSERT_TRUE(ok.pass) << ok.detail;
  EXPECT_EQ(ok.match.compared, 4u * 4 * 32);
  for (long long bit : {0LL, 17LL, 12345LL}) {
    const auto bad = verify_layer(d, m, 3, bit);
    EXPECT_FALSE(bad.pass);
    EXPECT_EQ(bad.stage, "compare");
    EXPECT_EQ(bad.match.mismatches, 1u);
    ASSERT_EQ(bad.match.first.size(), 1u);
  }
}

TEST(Compare, ReadsEveryOutputKind) {
  TensorLayout l;
  l.out_h = 1;
  l.out_w = 1;
  l.tiles = 1;
  l.out_channels = 32;
  std::vector<std::uint32_t> dmem(64, 0);
  dmem[0] = 0x80000001u;
  l.ofm_kind = ElemKind::B;
  EXPECT_EQ(oracle::read_output(dmem, l, 0, 0, 0), 1);
  EXPECT_EQ(oracle::read_output(dmem, l, 0, 0, 1), -1);
  EXPECT_EQ(oracle::read_output(dmem, l, 0, 0, 31), 1);
  dmem[0] = 0x0000000du;  // trits: 1, -1, 0
  l.ofm_kind = ElemKind::T;
  EXPECT_EQ(oracle::read_output(dmem, l, 0, 0, 0), 1);
  EXPECT_EQ(oracle::read_output(dmem, l, 0, 0, 1), -1);
  EXPECT_EQ(oracle::read_output(dmem, l, 0, 0, 2), 0);
  dmem[0] = 0x80ff7f01u;
  l.ofm_kind = ElemKind::I8;
  EXPECT_EQ(oracle::read_output(dmem, l, 0, 0, 2), -1);
  EXPECT_EQ(oracle::read_output(dmem, l, 0, 0, 3), -128);
  l.ofm_kind = ElemKind::I16;
  EXPECT_EQ(oracle::read_output(dmem, l, 0, 0, 1), -32513);
  l.ofm_kind = ElemKind::I32;
  EXPECT_EQ(oracle::read_output(dmem, l, 0, 0, 0), static_cast<std::int32_t>(0x80ff7f01u));
  EXPECT_THROW(oracle::compare(dmem, std::vector<std::int32_t>(3), l), LayerError);
}
