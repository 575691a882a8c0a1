#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace braintta {

using Word = std::uint32_t;

inline constexpr int kLanes = 32;
inline constexpr int kVectorBits = 1024;

// 1024-bit datapath payload. Lane 0 occupies bits [31:0].
struct Vec1024 {
  std::array<Word, kLanes> lane{};

  static Vec1024 broadcast(Word x) {
    Vec1024 v;
    v.lane.fill(x);
    return v;
  }

  std::int32_t signed_lane(int i) const { return static_cast<std::int32_t>(lane[i]); }

  friend bool operator==(const Vec1024&, const Vec1024&) = default;
};

// The vMAC accumulator bank: 32 signed 32-bit lanes.
struct AccVector {
  std::array<std::int32_t, kLanes> lane{};
  friend bool operator==(const AccVector&, const AccVector&) = default;
};

enum class MacMode : std::uint8_t { B, T, I8 };

// Elements carried by one 32-bit lane word.
constexpr int elements_per_word(MacMode m) {
  switch (m) {
    case MacMode::B: return 32;
    case MacMode::T: return 16;
    case MacMode::I8: return 4;
  }
  return 0;
}

// Input-channel vectorization factor v_C.
constexpr int vector_factor_c(MacMode m) { return elements_per_word(m); }
inline constexpr int kVectorFactorM = 32;

inline std::string_view to_string(MacMode m) {
  switch (m) {
    case MacMode::B: return "b";
    case MacMode::T: return "t";
    case MacMode::I8: return "i8";
  }
  return "?";
}

inline MacMode parse_mode(std::string_view s) {
  if (s == "b" || s == "B") return MacMode::B;
  if (s == "t" || s == "T") return MacMode::T;
  if (s == "i8" || s == "I8") return MacMode::I8;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "' (expected b, t or i8)");
}

// Element <-> bit-pattern encoding per mode.
//   B:  bit 1 -> +1, bit 0 -> -1
//   T:  2 bits per trit, bit 0 = magnitude, bit 1 = sign; (sign=1, mag=0) is non-canonical
//   I8: two's complement byte
namespace packing {

inline Word encode_element(MacMode m, int value) {
  switch (m) {
    case MacMode::B:
      if (value != 1 && value != -1) throw std::out_of_range("binary element must be +-1");
      return value > 0 ? 1u : 0u;
    case MacMode::T:
      if (value == 0) return 0u;
      if (value == 1) return 1u;
      if (value == -1) return 3u;
      throw std::out_of_range("ternary element must be in {-1,0,+1}");
    case MacMode::I8:
      if (value < -128 || value > 127) throw std::out_of_range("int8 element out of range");
      return static_cast<Word>(static_cast<std::uint8_t>(static_cast<std::int8_t>(value)));
  }
  return 0;
}

inline int decode_element(MacMode m, Word bits) {
  switch (m) {
    case MacMode::B: return (bits & 1u) ? 1 : -1;
    case MacMode::T: return (bits & 1u) ? ((bits & 2u) ? -1 : 1) : 0;
    case MacMode::I8: return static_cast<std::int8_t>(static_cast<std::uint8_t>(bits & 0xffu));
  }
  return 0;
}

inline constexpr int element_bits(MacMode m) { return 32 / elements_per_word(m); }

// Packs up to elements_per_word(m) values into one word, element i at the
// lowest position. Missing trailing elements are zero bit patterns.
inline Word pack_word(MacMode m, std::span<const int> values) {
  const int n = elements_per_word(m);
  if (static_cast<int>(values.size()) > n) throw std::out_of_range("too many elements for one word");
  const int eb = element_bits(m);
  Word w = 0;
  for (std::size_t i = 0; i < values.size(); ++i) w |= encode_element(m, values[i]) << (eb * i);
  return w;
}

inline std::vector<int> unpack_word(MacMode m, Word w) {
  const int n = elements_per_word(m);
  const int eb = element_bits(m);
  const Word mask = eb == 32 ? ~0u : ((1u << eb) - 1u);
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) out[i] = decode_element(m, (w >> (eb * i)) & mask);
  return out;
}

// Clears the sign bit of every zero-magnitude trit.
inline Word canonicalize_ternary(Word w) {
  const Word mag = w & 0x55555555u;
  return mag | (w & (mag << 1));
}

inline bool is_canonical_ternary(Word w) { return canonicalize_ternary(w) == w; }

// 16-bit lanes: element i lives in word i/2, low half first.
inline std::int16_t get_half(const Vec1024& v, int i) {
  return static_cast<std::int16_t>((v.lane[i / 2] >> (16 * (i % 2))) & 0xffffu);
}

inline void set_half(Vec1024& v, int i, std::int16_t x) {
  Word& w = v.lane[i / 2];
  const int sh = 16 * (i % 2);
  w = (w & ~(0xffffu << sh)) | (static_cast<Word>(static_cast<std::uint16_t>(x)) << sh);
}

}  // namespace packing
}  // namespace braintta
