#pragma once

// Bit-exact semantics of the datapath functional units. Everything here is a
// pure function; accumulator state lives in the core.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string_view>

#include "braintta/vec.hpp"

namespace braintta::funits {

enum class WidthMode : std::uint8_t { E16, E32 };

// Raised for data-dependent faults (bad lane index). The core converts it to
// a halted state.
struct UnitFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::int32_t wrap_add(std::int32_t a, std::int32_t b) {
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(a) + static_cast<std::uint32_t>(b));
}

template <typename T>
T saturate(std::int64_t x) {
  return static_cast<T>(std::clamp<std::int64_t>(x, std::numeric_limits<T>::min(), std::numeric_limits<T>::max()));
}

// ---------------------------------------------------------------- vMAC

// One reduction tree: dot product of the packed elements of two lane words.
inline int dot_lane(MacMode mode, Word a, Word w) {
  switch (mode) {
    case MacMode::B:
      // XNOR + popcount
      return 2 * std::popcount(static_cast<Word>(~(a ^ w))) - 32;
    case MacMode::T: {
      a = packing::canonicalize_ternary(a);
      w = packing::canonicalize_ternary(w);
      // gated XNOR: a product is live only where both magnitudes are set
      const Word live = a & w & 0x55555555u;
      const Word neg = ((a ^ w) >> 1) & live;
      return std::popcount(live) - 2 * std::popcount(neg);
    }
    case MacMode::I8: {
      int sum = 0;
      for (int i = 0; i < 4; ++i) {
        const auto x = static_cast<std::int8_t>(a >> (8 * i));
        const auto y = static_cast<std::int8_t>(w >> (8 * i));
        sum += x * y;
      }
      return sum;
    }
  }
  return 0;
}

inline AccVector vmac_trigger(MacMode mode, const Vec1024& act, const Vec1024& wgt, const AccVector& acc) {
  AccVector out;
  for (int m = 0; m < kLanes; ++m) out.lane[m] = wrap_add(acc.lane[m], dot_lane(mode, act.lane[m], wgt.lane[m]));
  return out;
}

inline AccVector vmac_init(const Vec1024& bias) {
  AccVector acc;
  for (int m = 0; m < kLanes; ++m) acc.lane[m] = bias.signed_lane(m);
  return acc;
}

inline Vec1024 vmac_read32(const AccVector& acc) {
  Vec1024 v;
  for (int m = 0; m < kLanes; ++m) v.lane[m] = static_cast<Word>(acc.lane[m]);
  return v;
}

// 32 lanes saturated to int16, two per word; upper 512 bits are zero.
inline Vec1024 vmac_read16(const AccVector& acc) {
  Vec1024 v;
  for (int m = 0; m < kLanes; ++m) packing::set_half(v, m, saturate<std::int16_t>(acc.lane[m]));
  return v;
}

// ---------------------------------------------------------------- vADD

inline Vec1024 vadd(WidthMode wm, const Vec1024& a, const Vec1024& b) {
  Vec1024 out;
  if (wm == WidthMode::E32) {
    for (int i = 0; i < kLanes; ++i) out.lane[i] = a.lane[i] + b.lane[i];
  } else {
    for (int i = 0; i < kLanes; ++i) {
      const std::int64_t s = std::int64_t{packing::get_half(a, i)} + packing::get_half(b, i);
      packing::set_half(out, i, saturate<std::int16_t>(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------- vOPS

// (acc * mult) / 2^shift, rounded half away from zero.
inline std::int64_t scale_round(std::int32_t acc, std::int32_t mult, int shift) {
  const std::int64_t p = std::int64_t{acc} * mult;
  if (shift == 0) return p;
  const std::uint64_t mag = p < 0 ? static_cast<std::uint64_t>(-p) : static_cast<std::uint64_t>(p);
  const std::uint64_t q = (mag + (std::uint64_t{1} << (shift - 1))) >> shift;
  return p < 0 ? -static_cast<std::int64_t>(q) : static_cast<std::int64_t>(q);
}

inline std::int8_t requant_i8_lane(std::int32_t acc, std::int32_t mult, int shift, std::int8_t zp) {
  return saturate<std::int8_t>(scale_round(acc, mult, shift) + zp);
}

// 32 int8 results packed four per word in lanes 0..7 (256 bits).
inline Vec1024 requant_i8(const Vec1024& acc, std::int32_t mult, int shift, std::int8_t zp) {
  if (shift < 0 || shift > 31) throw UnitFault("requant shift out of range [0,31]");
  Vec1024 out;
  for (int m = 0; m < kLanes; ++m) {
    const auto q = static_cast<std::uint8_t>(requant_i8_lane(acc.signed_lane(m), mult, shift, zp));
    out.lane[m / 4] |= Word{q} << (8 * (m % 4));
  }
  return out;
}

// x >= threshold -> +1 (bit 1), else -1.
inline Word requant_bin(const Vec1024& acc16, std::int16_t threshold) {
  Word w = 0;
  for (int m = 0; m < kLanes; ++m)
    if (packing::get_half(acc16, m) >= threshold) w |= 1u << m;
  return w;
}

// x > thr -> +1, x < -thr -> -1, else 0. Result in lanes 0 and 1 (64 bits).
inline Vec1024 requant_tern(const Vec1024& acc16, std::int16_t thr) {
  if (thr < 0) throw UnitFault("ternary threshold must be non-negative");
  Vec1024 out;
  for (int m = 0; m < kLanes; ++m) {
    const int x = packing::get_half(acc16, m);
    Word code = 0;
    if (x > thr) code = 1u;
    else if (x < -thr) code = 3u;
    out.lane[m / 16] |= code << (2 * (m % 16));
  }
  return out;
}

inline Vec1024 relu(WidthMode wm, const Vec1024& v) {
  Vec1024 out;
  if (wm == WidthMode::E32) {
    for (int i = 0; i < kLanes; ++i) out.lane[i] = v.signed_lane(i) < 0 ? 0u : v.lane[i];
  } else {
    for (int i = 0; i < kLanes; ++i) packing::set_half(out, i, std::max<std::int16_t>(0, packing::get_half(v, i)));
  }
  return out;
}

inline Vec1024 vmax(WidthMode wm, const Vec1024& a, const Vec1024& b) {
  Vec1024 out;
  if (wm == WidthMode::E32) {
    for (int i = 0; i < kLanes; ++i) out.lane[i] = a.signed_lane(i) >= b.signed_lane(i) ? a.lane[i] : b.lane[i];
  } else {
    for (int i = 0; i < kLanes; ++i)
      packing::set_half(out, i, std::max(packing::get_half(a, i), packing::get_half(b, i)));
  }
  return out;
}

inline Vec1024 bcast(Word x) { return Vec1024::broadcast(x); }

inline Vec1024 insert(Vec1024 v, std::int64_t idx, Word x) {
  if (idx < 0 || idx >= kLanes) throw UnitFault("vector lane index out of range");
  v.lane[static_cast<std::size_t>(idx)] = x;
  return v;
}

inline Word extract(const Vec1024& v, std::int64_t idx) {
  if (idx < 0 || idx >= kLanes) throw UnitFault("vector lane index out of range");
  return v.lane[static_cast<std::size_t>(idx)];
}

// ---------------------------------------------------------------- scalar ALU

enum class AluOp : std::uint8_t { Add, Sub, And, Or, Xor, Shl, ShrS, ShrU, Eq, LtS, LtU, Mul };

inline constexpr std::string_view kAluOpNames[] = {"add", "sub", "and",  "or", "xor",  "shl",
                                                   "shr_s", "shr_u", "eq", "lt_s", "lt_u", "mul"};

inline Word salu(AluOp op, Word a, Word b) {
  const auto sa = static_cast<std::int32_t>(a);
  const auto sb = static_cast<std::int32_t>(b);
  switch (op) {
    case AluOp::Add: return a + b;
    case AluOp::Sub: return a - b;
    case AluOp::And: return a & b;
    case AluOp::Or: return a | b;
    case AluOp::Xor: return a ^ b;
    case AluOp::Shl: return a << (b & 31u);
    case AluOp::ShrS: return static_cast<Word>(sa >> (b & 31u));
    case AluOp::ShrU: return a >> (b & 31u);
    case AluOp::Eq: return a == b ? 1u : 0u;
    case AluOp::LtS: return sa < sb ? 1u : 0u;
    case AluOp::LtU: return a < b ? 1u : 0u;
    case AluOp::Mul: return a * b;
  }
  return 0;
}

}  // namespace braintta::funits
