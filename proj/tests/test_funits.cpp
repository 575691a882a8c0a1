#include <gtest/gtest.h>

#include <array>
#include <random>

#include "braintta/funits.hpp"

using namespace braintta;
using namespace braintta::funits;

namespace {

int scalar_dot(MacMode m, Word a, Word w) {
  const auto x = packing::unpack_word(m, a);
  const auto y = packing::unpack_word(m, w);
  int s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

// Every element position, every pair of element codes, other positions held at
// a fixed background.
void exhaustive_positions(MacMode m, Word background_a, Word background_w) {
  const int eb = packing::element_bits(m);
  const int codes = 1 << eb;
  const Word mask = (Word{1} << eb) - 1;
  for (int pos = 0; pos < elements_per_word(m); ++pos)
    for (int ca = 0; ca < codes; ++ca)
      for (int cw = 0; cw < codes; ++cw) {
        const int sh = eb * pos;
        const Word a = (background_a & ~(mask << sh)) | (static_cast<Word>(ca) << sh);
        const Word w = (background_w & ~(mask << sh)) | (static_cast<Word>(cw) << sh);
        ASSERT_EQ(dot_lane(m, a, w), scalar_dot(m, a, w)) << "pos " << pos << " codes " << ca << "," << cw;
      }
}

}  // namespace

TEST(Dot, BinaryHandValues) {
  EXPECT_EQ(dot_lane(MacMode::B, 0xffffffffu, 0xffffffffu), 32);
  EXPECT_EQ(dot_lane(MacMode::B, 0u, 0u), 32);
  EXPECT_EQ(dot_lane(MacMode::B, 0xffffffffu, 0u), -32);
  EXPECT_EQ(dot_lane(MacMode::B, 0x0000ffffu, 0xffffffffu), 0);
  EXPECT_EQ(dot_lane(MacMode::B, 0x1u, 0x0u), 30);
}

TEST(Dot, TernaryHandValues) {
  const std::array<int, 3> a{1, -1, 1};
  const std::array<int, 3> w{1, 1, -1};
  EXPECT_EQ(dot_lane(MacMode::T, packing::pack_word(MacMode::T, a), packing::pack_word(MacMode::T, w)), -1);
  EXPECT_EQ(dot_lane(MacMode::T, 0x55555555u, 0x55555555u), 16);
  EXPECT_EQ(dot_lane(MacMode::T, 0xffffffffu, 0x55555555u), -16);
  // sign-only trits (code 2) are zero
  EXPECT_EQ(dot_lane(MacMode::T, 0xaaaaaaaau, 0xffffffffu), 0);
}

TEST(Dot, Int8HandValues) {
  EXPECT_EQ(dot_lane(MacMode::I8, 0x7f7f7f7fu, 0x7f7f7f7fu), 4 * 127 * 127);
  EXPECT_EQ(dot_lane(MacMode::I8, 0x80808080u, 0x80808080u), 4 * 128 * 128);
  EXPECT_EQ(dot_lane(MacMode::I8, 0x80808080u, 0x7f7f7f7fu), -4 * 128 * 127);
  EXPECT_EQ(dot_lane(MacMode::I8, 0x000002ffu, 0x00000303u), -3 + 6);
}

TEST(Dot, ExhaustivePerPositionBinary) {
  exhaustive_positions(MacMode::B, 0, 0);
  exhaustive_positions(MacMode::B, 0xa5a5a5a5u, 0x3c3c3c3cu);
}

TEST(Dot, ExhaustivePerPositionTernary) {
  exhaustive_positions(MacMode::T, 0, 0);
  exhaustive_positions(MacMode::T, 0x5d1c7147u, 0xc5d347f1u);
}

TEST(Dot, ExhaustivePerPositionInt8) {
  exhaustive_positions(MacMode::I8, 0, 0);
  exhaustive_positions(MacMode::I8, 0x80ff017fu, 0x7f80ff01u);
}

TEST(Dot, RandomWordsAgreeWithScalarReference) {
  std::mt19937_64 rng(20240611);
  for (MacMode m : {MacMode::B, MacMode::T, MacMode::I8})
    for (int i = 0; i < 100000; ++i) {
      const auto a = static_cast<Word>(rng());
      const auto w = static_cast<Word>(rng());
      ASSERT_EQ(dot_lane(m, a, w), scalar_dot(m, a, w)) << to_string(m) << " " << a << " " << w;
    }
}

TEST(Vmac, AccumulatesPerLaneAndWraps) {
  AccVector acc;
  acc.lane[0] = std::numeric_limits<std::int32_t>::max();
  acc.lane[1] = -5;
  const auto out = vmac_trigger(MacMode::B, Vec1024::broadcast(0), Vec1024::broadcast(0), acc);
  EXPECT_EQ(out.lane[0], std::numeric_limits<std::int32_t>::min() + 31);
  EXPECT_EQ(out.lane[1], 27);
  EXPECT_EQ(out.lane[31], 32);
}

TEST(Vmac, InitAndReads) {
  Vec1024 bias;
  bias.lane[0] = static_cast<Word>(-40000);
  bias.lane[1] = 40000;
  bias.lane[2] = static_cast<Word>(-7);
  const AccVector acc = vmac_init(bias);
  EXPECT_EQ(acc.lane[0], -40000);
  EXPECT_EQ(vmac_read32(acc), bias);
  const Vec1024 h = vmac_read16(acc);
  EXPECT_EQ(packing::get_half(h, 0), -32768);
  EXPECT_EQ(packing::get_half(h, 1), 32767);
  EXPECT_EQ(packing::get_half(h, 2), -7);
  for (int i = 16; i < kLanes; ++i) EXPECT_EQ(h.lane[i], 0u);
}

TEST(Vadd, E32WrapsE16Saturates) {
  Vec1024 a, b;
  a.lane[0] = 0x7fffffffu;
  b.lane[0] = 1;
  EXPECT_EQ(vadd(WidthMode::E32, a, b).lane[0], 0x80000000u);
  Vec1024 c, d;
  packing::set_half(c, 0, 30000);
  packing::set_half(d, 0, 30000);
  packing::set_half(c, 1, -30000);
  packing::set_half(d, 1, -30000);
  packing::set_half(c, 2, 5);
  packing::set_half(d, 2, -9);
  const Vec1024 s = vadd(WidthMode::E16, c, d);
  EXPECT_EQ(packing::get_half(s, 0), 32767);
  EXPECT_EQ(packing::get_half(s, 1), -32768);
  EXPECT_EQ(packing::get_half(s, 2), -4);
}

TEST(Requant, RoundsHalfAwayFromZero) {
  EXPECT_EQ(scale_round(3, 1, 1), 2);
  EXPECT_EQ(scale_round(-3, 1, 1), -2);
  EXPECT_EQ(scale_round(1, 1, 1), 1);
  EXPECT_EQ(scale_round(-1, 1, 1), -1);
  EXPECT_EQ(scale_round(5, 1, 2), 1);
  EXPECT_EQ(scale_round(-5, 1, 2), -1);
  EXPECT_EQ(scale_round(6, 1, 2), 2);
  EXPECT_EQ(scale_round(-6, 1, 2), -2);
  EXPECT_EQ(scale_round(1000, 3, 0), 3000);
  EXPECT_EQ(scale_round(std::numeric_limits<std::int32_t>::min(), std::numeric_limits<std::int32_t>::min(), 31),
            std::int64_t{1} << 31);
}

TEST(Requant, Int8SaturatesAtBothEnds) {
  EXPECT_EQ(requant_i8_lane(1 << 30, 1, 0, 0), 127);
  EXPECT_EQ(requant_i8_lane(-(1 << 30), 1, 0, 0), -128);
  EXPECT_EQ(requant_i8_lane(100, 1, 0, 27), 127);
  EXPECT_EQ(requant_i8_lane(100, 1, 0, 28), 127);
  EXPECT_EQ(requant_i8_lane(-100, 1, 0, -28), -128);
  EXPECT_EQ(requant_i8_lane(-100, 1, 0, -27), -127);
  EXPECT_EQ(requant_i8_lane(0, 12345, 7, -128), -128);
}

TEST(Requant, Int8IsMonotonic) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int32_t> mult(1, 1 << 16), zp(-128, 127), x(-(1 << 24), 1 << 24);
  std::uniform_int_distribution<int> shift(0, 31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = mult(rng);
    const int s = shift(rng);
    const auto z = static_cast<std::int8_t>(zp(rng));
    std::int32_t prev_x = x(rng);
    int prev = requant_i8_lane(prev_x, m, s, z);
    for (int i = 0; i < 500; ++i) {
      const std::int32_t nx = prev_x + static_cast<std::int32_t>(rng() % 4096);
      const int q = requant_i8_lane(nx, m, s, z);
      ASSERT_LE(prev, q) << "mult " << m << " shift " << s << " at " << nx;
      prev = q;
      prev_x = nx;
    }
  }
}

TEST(Requant, VectorPacksFourPerWord) {
  Vec1024 acc;
  for (int m = 0; m < kLanes; ++m) acc.lane[m] = static_cast<Word>(m - 16);
  const Vec1024 q = requant_i8(acc, 1, 0, 0);
  EXPECT_EQ(q.lane[0], 0xf3f2f1f0u);
  EXPECT_EQ(q.lane[7], 0x0f0e0d0cu);
  for (int i = 8; i < kLanes; ++i) EXPECT_EQ(q.lane[i], 0u);
  EXPECT_THROW(requant_i8(acc, 1, 32, 0), UnitFault);
}

TEST(Requant, BinaryThresholdIsInclusive) {
  Vec1024 acc;
  for (int m = 0; m < kLanes; ++m) packing::set_half(acc, m, static_cast<std::int16_t>(m - 16));
  EXPECT_EQ(requant_bin(acc, 0), 0xffff0000u);
  EXPECT_EQ(requant_bin(acc, -16), 0xffffffffu);
  EXPECT_EQ(requant_bin(acc, 16), 0u);
}

TEST(Requant, TernaryThresholdIsSymmetric) {
  Vec1024 acc;
  for (int m = 0; m < kLanes; ++m) packing::set_half(acc, m, static_cast<std::int16_t>(m - 16));
  const Vec1024 q = requant_tern(acc, 2);
  for (int m = 0; m < kLanes; ++m) {
    const int x = m - 16;
    const int want = x > 2 ? 1 : (x < -2 ? -1 : 0);
    EXPECT_EQ(packing::decode_element(MacMode::T, q.lane[m / 16] >> (2 * (m % 16))), want) << m;
  }
  EXPECT_TRUE(packing::is_canonical_ternary(q.lane[0]));
  EXPECT_THROW(requant_tern(acc, -1), UnitFault);
}

TEST(Packing, RoundTripValuesAndWords) {
  std::mt19937_64 rng(99);
  for (MacMode m : {MacMode::B, MacMode::T, MacMode::I8}) {
    for (int i = 0; i < 100000; ++i) {
      std::vector<int> v(static_cast<std::size_t>(elements_per_word(m)));
      for (auto& e : v) {
        switch (m) {
          case MacMode::B: e = (rng() & 1) ? 1 : -1; break;
          case MacMode::T: e = static_cast<int>(rng() % 3) - 1; break;
          case MacMode::I8: e = static_cast<int>(rng() % 256) - 128; break;
        }
      }
      const Word w = packing::pack_word(m, v);
      ASSERT_EQ(packing::unpack_word(m, w), v);
      const auto raw = static_cast<Word>(rng());
      const Word canon = m == MacMode::T ? packing::canonicalize_ternary(raw) : raw;
      ASSERT_EQ(packing::pack_word(m, packing::unpack_word(m, raw)), canon);
    }
  }
}

TEST(Packing, RejectsOutOfDomainValues) {
  EXPECT_THROW(packing::encode_element(MacMode::B, 0), std::out_of_range);
  EXPECT_THROW(packing::encode_element(MacMode::T, 2), std::out_of_range);
  EXPECT_THROW(packing::encode_element(MacMode::I8, 128), std::out_of_range);
  const std::vector<int> too_many(17, 0);
  EXPECT_THROW(packing::pack_word(MacMode::T, too_many), std::out_of_range);
}

TEST(Packing, TernaryCanonicalForm) {
  EXPECT_EQ(packing::canonicalize_ternary(0x2u), 0u);
  EXPECT_EQ(packing::canonicalize_ternary(0x3u), 0x3u);
  EXPECT_EQ(packing::canonicalize_ternary(0xaaaaaaaau), 0u);
  EXPECT_FALSE(packing::is_canonical_ternary(0x8u));
}

TEST(Vops, ReluMaxAndLaneAccess) {
  Vec1024 a, b;
  a.lane[0] = static_cast<Word>(-3);
  a.lane[1] = 9;
  b.lane[0] = static_cast<Word>(-1);
  b.lane[1] = 4;
  EXPECT_EQ(relu(WidthMode::E32, a).lane[0], 0u);
  EXPECT_EQ(relu(WidthMode::E32, a).lane[1], 9u);
  EXPECT_EQ(vmax(WidthMode::E32, a, b).lane[0], static_cast<Word>(-1));
  EXPECT_EQ(vmax(WidthMode::E32, a, b).lane[1], 9u);
  Vec1024 h;
  packing::set_half(h, 0, -5);
  packing::set_half(h, 1, 5);
  EXPECT_EQ(relu(WidthMode::E16, h).lane[0], 0x00050000u);
  EXPECT_EQ(extract(insert(Vec1024{}, 31, 7), 31), 7u);
  EXPECT_THROW(extract(a, 32), UnitFault);
  EXPECT_THROW(insert(a, -1, 0), UnitFault);
  EXPECT_EQ(bcast(0xabcdu).lane[17], 0xabcdu);
}

TEST(Salu, OperandOrder) {
  EXPECT_EQ(salu(AluOp::Sub, 10, 3), 7u);
  EXPECT_EQ(salu(AluOp::LtS, static_cast<Word>(-1), 0), 1u);
  EXPECT_EQ(salu(AluOp::LtU, static_cast<Word>(-1), 0), 0u);
  EXPECT_EQ(salu(AluOp::Shl, 1, 33), 2u);
  EXPECT_EQ(salu(AluOp::ShrS, 0x80000000u, 31), 0xffffffffu);
  EXPECT_EQ(salu(AluOp::ShrU, 0x80000000u, 31), 1u);
  EXPECT_EQ(salu(AluOp::Eq, 4, 4), 1u);
  EXPECT_EQ(salu(AluOp::Mul, 0x10000u, 0x10000u), 0u);
  EXPECT_EQ(kAluOpNames[static_cast<int>(AluOp::LtU)], "lt_u");
}
