#pragma once

// Scalar reference layers on unpacked integer tensors. Written directly from
// the layer definitions; nothing here calls into the functional-unit models
// or the kernel generators.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "braintta/layer.hpp"
#include "braintta/layout.hpp"

namespace braintta::oracle {

// Value a padded border position contributes: binary has no zero.
inline int pad_value(MacMode m) { return m == MacMode::B ? -1 : 0; }

// Accumulators wrap like the 32-bit hardware registers.
inline std::int32_t wrap32(std::int64_t x) { return static_cast<std::int32_t>(static_cast<std::uint32_t>(x)); }

inline std::int64_t clamp(std::int64_t x, std::int64_t lo, std::int64_t hi) { return x < lo ? lo : x > hi ? hi : x; }

// [OH][OW][M] pre-requant accumulators.
inline std::vector<std::int32_t> conv_ref(const LayerDesc& d, const std::vector<int>& ifm, const std::vector<int>& w,
                                          const std::vector<std::int32_t>& bias) {
  const auto& s = d.shape;
  if (ifm.size() != static_cast<std::size_t>(s.H * s.W * s.C) || w.size() != static_cast<std::size_t>(s.M * s.R * s.S * s.C))
    throw LayerError("conv_ref: tensor shape mismatch");
  const int OH = s.OH(), OW = s.OW();
  std::vector<std::int32_t> out(static_cast<std::size_t>(OH * OW * s.M));
  for (int oy = 0; oy < OH; ++oy)
    for (int ox = 0; ox < OW; ++ox)
      for (int m = 0; m < s.M; ++m) {
        std::int64_t acc = bias.empty() ? 0 : bias[static_cast<std::size_t>(m)];
        for (int r = 0; r < s.R; ++r)
          for (int q = 0; q < s.S; ++q) {
            const int y = oy * s.stride + r - s.pad;
            const int x = ox * s.stride + q - s.pad;
            const bool inside = y >= 0 && y < s.H && x >= 0 && x < s.W;
            for (int c = 0; c < s.C; ++c) {
              const int a = inside ? ifm[static_cast<std::size_t>((y * s.W + x) * s.C + c)] : pad_value(d.mode);
              acc += static_cast<std::int64_t>(a) * w[static_cast<std::size_t>(((m * s.R + r) * s.S + q) * s.C + c)];
            }
          }
        out[static_cast<std::size_t>((oy * OW + ox) * s.M + m)] = wrap32(acc);
      }
  return out;
}

inline std::vector<std::int32_t> fc_ref(const LayerDesc& d, const std::vector<int>& ifm, const std::vector<int>& w,
                                        const std::vector<std::int32_t>& bias) {
  const auto& s = d.shape;
  if (ifm.size() != static_cast<std::size_t>(s.C) || w.size() != static_cast<std::size_t>(s.M * s.C))
    throw LayerError("fc_ref: tensor shape mismatch");
  std::vector<std::int32_t> out(static_cast<std::size_t>(s.M));
  for (int m = 0; m < s.M; ++m) {
    std::int64_t acc = bias.empty() ? 0 : bias[static_cast<std::size_t>(m)];
    for (int c = 0; c < s.C; ++c) acc += static_cast<std::int64_t>(ifm[static_cast<std::size_t>(c)]) * w[static_cast<std::size_t>(m * s.C + c)];
    out[static_cast<std::size_t>(m)] = wrap32(acc);
  }
  return out;
}

inline std::vector<std::int32_t> dwconv_ref(const LayerDesc& d, const std::vector<int>& ifm, const std::vector<int>& w,
                                            const std::vector<std::int32_t>& bias) {
  const auto& s = d.shape;
  if (ifm.size() != static_cast<std::size_t>(s.H * s.W * s.C) || w.size() != static_cast<std::size_t>(s.C * s.R * s.S))
    throw LayerError("dwconv_ref: tensor shape mismatch");
  const int OH = s.OH(), OW = s.OW();
  std::vector<std::int32_t> out(static_cast<std::size_t>(OH * OW * s.C));
  for (int c = 0; c < s.C; ++c)
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        std::int64_t acc = bias.empty() ? 0 : bias[static_cast<std::size_t>(c)];
        for (int r = 0; r < s.R; ++r)
          for (int q = 0; q < s.S; ++q) {
            const int y = oy * s.stride + r - s.pad;
            const int x = ox * s.stride + q - s.pad;
            const int a = (y >= 0 && y < s.H && x >= 0 && x < s.W) ? ifm[static_cast<std::size_t>((y * s.W + x) * s.C + c)]
                                                                   : pad_value(d.mode);
            acc += static_cast<std::int64_t>(a) * w[static_cast<std::size_t>((c * s.R + r) * s.S + q)];
          }
        out[static_cast<std::size_t>((oy * OW + ox) * s.C + c)] = wrap32(acc);
      }
  return out;
}

// e32 wraps, e16 saturates.
inline std::vector<std::int32_t> residual_ref(funits::WidthMode width, const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw LayerError("residual_ref: operand sizes differ");
  std::vector<std::int32_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::int64_t sum = std::int64_t{a[i]} + b[i];
    out[i] = width == funits::WidthMode::E32 ? wrap32(sum) : static_cast<std::int32_t>(clamp(sum, -32768, 32767));
  }
  return out;
}

// round(x * mult / 2^shift), ties away from zero, on exact integers.
inline std::int64_t rescale(std::int64_t x, std::int64_t mult, int shift) {
  const std::int64_t p = x * mult;
  const std::int64_t mag = std::llabs(p);
  const std::int64_t div = std::int64_t{1} << shift;
  std::int64_t q = mag / div;
  if (2 * (mag % div) >= div && shift > 0) ++q;
  return p < 0 ? -q : q;
}

// Requantizes values laid out with the channel innermost (`channels` per
// pixel); group g = channel / 32 selects its constants. `acc16` first
// saturates to int16 as the 16-bit accumulator read does.
inline std::vector<std::int32_t> requant_ref(QuantTarget target, const std::vector<QuantParams>& q, int channels,
                                             const std::vector<std::int32_t>& x, bool acc16) {
  std::vector<std::int32_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int g = static_cast<int>(i % static_cast<std::size_t>(channels)) / 32;
    const QuantParams& p = q.size() == 1 ? q[0] : q.at(static_cast<std::size_t>(g));
    const std::int64_t v = acc16 ? clamp(x[i], -32768, 32767) : x[i];
    switch (target) {
      case QuantTarget::None: out[i] = static_cast<std::int32_t>(v); break;
      case QuantTarget::I8: out[i] = static_cast<std::int32_t>(clamp(rescale(v, p.mult, p.shift) + p.zp, -128, 127)); break;
      case QuantTarget::B: out[i] = v >= p.threshold ? 1 : -1; break;
      case QuantTarget::T: out[i] = v > p.threshold ? 1 : (v < -p.threshold ? -1 : 0); break;
    }
  }
  return out;
}

// Full layer output, decoded element values in (OH, OW, M) order.
inline std::vector<std::int32_t> layer_ref(const LayerDesc& d, const LayerTensors& t) {
  switch (d.kind) {
    case LayerKind::Conv:
      return requant_ref(d.target, d.quant, d.shape.M, conv_ref(d, t.ifm, t.weights, t.bias), d.reads_16bit());
    case LayerKind::Fc:
      return requant_ref(d.target, d.quant, d.shape.M, fc_ref(d, t.ifm, t.weights, t.bias), d.reads_16bit());
    case LayerKind::DwConv:
      return requant_ref(d.target, d.quant, d.shape.C, dwconv_ref(d, t.ifm, t.weights, t.bias), d.reads_16bit());
    case LayerKind::Residual: return residual_ref(d.elem_width, t.ifm, t.ifm2);
    case LayerKind::Requant: {
      const std::vector<std::int32_t> x(t.ifm.begin(), t.ifm.end());
      return requant_ref(d.target, d.quant, d.shape.C, x, false);
    }
  }
  return {};
}

// ---------------------------------------------------------------- compare

struct Mismatch {
  int y = 0;
  int x = 0;
  int channel = 0;
  std::int32_t got = 0;
  std::int32_t want = 0;
};

struct MatchReport {
  std::size_t compared = 0;
  std::size_t mismatches = 0;
  std::vector<Mismatch> first;  // up to the requested limit

  bool ok() const { return mismatches == 0; }
  std::string summary() const {
    std::string s = std::to_string(mismatches) + " mismatches in " + std::to_string(compared) + " elements";
    for (const auto& m : first)
      s += "\n  (" + std::to_string(m.y) + "," + std::to_string(m.x) + "," + std::to_string(m.channel) +
           "): got " + std::to_string(m.got) + ", want " + std::to_string(m.want);
    return s;
  }
};

// Reads one output element from the simulated DMEM words.
inline std::int32_t read_output(const std::vector<std::uint32_t>& dmem, const TensorLayout& l, int y, int x, int ch) {
  const std::uint64_t tile = static_cast<std::uint64_t>(ch / 32);
  const int lane = ch % 32;
  const std::uint64_t base = l.ofm_addr + ((static_cast<std::uint64_t>(y) * l.out_w + x) * l.tiles + tile) * l.out_tile_bytes;
  auto byte = [&](std::uint64_t a) { return (dmem.at(a / 4) >> (8 * (a % 4))) & 0xffu; };
  switch (l.ofm_kind) {
    case ElemKind::B: return (byte(base + lane / 8) >> (lane % 8)) & 1u ? 1 : -1;
    case ElemKind::T: {
      const unsigned code = (byte(base + lane / 4) >> (2 * (lane % 4))) & 3u;
      return (code & 1u) ? ((code & 2u) ? -1 : 1) : 0;
    }
    case ElemKind::I8: return static_cast<std::int8_t>(byte(base + static_cast<std::uint64_t>(lane)));
    case ElemKind::I16:
      return static_cast<std::int16_t>(byte(base + 2u * lane) | (byte(base + 2u * lane + 1) << 8));
    case ElemKind::I32: {
      const std::uint64_t a = base + 4u * static_cast<std::uint64_t>(lane);
      return static_cast<std::int32_t>(byte(a) | (byte(a + 1) << 8) | (byte(a + 2) << 16) | (byte(a + 3) << 24));
    }
  }
  return 0;
}

inline MatchReport compare(const std::vector<std::uint32_t>& dmem, const std::vector<std::int32_t>& ref, const TensorLayout& l,
                           std::size_t max_report = 8) {
  MatchReport r;
  const std::size_t expect = static_cast<std::size_t>(l.out_h) * l.out_w * l.out_channels;
  if (ref.size() != expect) throw LayerError("compare: reference tensor has the wrong size");
  for (int y = 0; y < l.out_h; ++y)
    for (int x = 0; x < l.out_w; ++x)
      for (int c = 0; c < l.out_channels; ++c) {
        const auto want = ref[(static_cast<std::size_t>(y) * l.out_w + x) * l.out_channels + c];
        const auto got = read_output(dmem, l, y, x, c);
        ++r.compared;
        if (got == want) continue;
        ++r.mismatches;
        if (r.first.size() < max_report) r.first.push_back({y, x, c, got, want});
      }
  return r;
}

}  // namespace braintta::oracle
