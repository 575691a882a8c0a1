#pragma once

// Placement and packing of layer tensors in DMEM (feature maps) and PMEM
// (per-tile parameter records).
//
// Feature maps are (H, W, channel) with the channel innermost. Conv and fc
// inputs hold v_C channels per word; depthwise inputs hold one channel per
// word (element at bit 0); wide elementwise inputs are plain int16/int32
// arrays. Outputs are (OH, OW, M) in 32-channel tiles.
//
// A PMEM record per output tile: [params 128 B][bias 128 B][J weight vectors].
// params lane 0 = multiplier or threshold, lane 1 = shift, lane 2 = zero point.

#include <cstdint>
#include <string>
#include <vector>

#include "braintta/config.hpp"
#include "braintta/isa.hpp"
#include "braintta/layer.hpp"
#include "braintta/vec.hpp"

namespace braintta {

inline constexpr std::uint32_t kVecBytes = 128;

struct TensorLayout {
  std::uint32_t ifm_addr = 0;
  std::uint32_t ifm_bytes = 0;
  std::uint32_t ifm2_addr = 0;  // residual only
  std::uint32_t ifm2_bytes = 0;
  std::uint32_t ofm_addr = 0;
  std::uint32_t ofm_bytes = 0;
  std::uint32_t param_addr = 0;  // PMEM
  std::uint32_t param_bytes = 0;
  std::uint32_t record_bytes = 0;  // per output tile
  int steps = 0;                   // reduction steps J per tile
  int out_h = 0;
  int out_w = 0;
  int out_channels = 0;
  int tiles = 0;                   // 32-channel groups per output pixel
  std::uint32_t out_tile_bytes = 0;
  ElemKind ifm_kind = ElemKind::B;
  ElemKind ofm_kind = ElemKind::I32;
  std::string ifm_packing;  // "hwc-groups", "hwc-lanes", "hwc-i16", "hwc-i32"
  std::string ofm_packing;  // "hwm-<b|t|i8|i16|i32>"

  std::uint32_t out_pixel_bytes() const { return static_cast<std::uint32_t>(tiles) * out_tile_bytes; }
};

inline std::string_view to_string(ElemKind k) {
  switch (k) {
    case ElemKind::B: return "b";
    case ElemKind::T: return "t";
    case ElemKind::I8: return "i8";
    case ElemKind::I16: return "i16";
    case ElemKind::I32: return "i32";
  }
  return "?";
}

// Bytes one 32-channel output tile occupies.
constexpr std::uint32_t tile_bytes(ElemKind k) { return static_cast<std::uint32_t>(kLanes * elem_bits(k) / 8); }

inline nlohmann::json to_json(const TensorLayout& l) {
  return {{"ifm", {{"memory", "DMEM"}, {"addr", l.ifm_addr}, {"bytes", l.ifm_bytes}, {"packing", l.ifm_packing}}},
          {"ifm2", {{"memory", "DMEM"}, {"addr", l.ifm2_addr}, {"bytes", l.ifm2_bytes}}},
          {"ofm", {{"memory", "DMEM"}, {"addr", l.ofm_addr}, {"bytes", l.ofm_bytes}, {"packing", l.ofm_packing}}},
          {"params", {{"memory", "PMEM"}, {"addr", l.param_addr}, {"bytes", l.param_bytes}, {"record_bytes", l.record_bytes}}},
          {"steps", l.steps},
          {"out", {{"H", l.out_h}, {"W", l.out_w}, {"C", l.out_channels}, {"tiles", l.tiles}, {"tile_bytes", l.out_tile_bytes}}}};
}

namespace detail {

constexpr std::uint32_t align_up(std::uint64_t x, std::uint32_t a) { return static_cast<std::uint32_t>((x + a - 1) / a * a); }

inline void check_capacity(const MachineConfig& m, const std::string& mem, std::uint64_t need) {
  const int mi = m.find_memory(mem);
  if (mi < 0) throw LayerError("machine has no memory named " + mem);
  const auto cap = m.memories[mi].bytes();
  if (need > cap)
    throw LayerError(mem + " capacity exceeded: layer needs " + std::to_string(need) + " bytes, " + mem + " holds " +
                     std::to_string(cap) + " (short by " + std::to_string(need - cap) + ")");
}

}  // namespace detail

// Reduction steps per output tile.
inline int reduction_steps(const LayerDesc& d) {
  const auto& s = d.shape;
  if (d.kind == LayerKind::DwConv) return s.R * s.S;
  return s.R * s.S * (s.C / vector_factor_c(d.mode));
}

inline TensorLayout layout_tensors(const LayerDesc& d, const MachineConfig& m) {
  check_layer(d);
  const auto& s = d.shape;
  TensorLayout l;
  l.ifm_kind = d.input_kind();
  l.ofm_kind = d.output_kind();
  l.out_tile_bytes = tile_bytes(l.ofm_kind);
  l.ofm_packing = "hwm-" + std::string(to_string(l.ofm_kind));
  const std::uint64_t hw = static_cast<std::uint64_t>(s.H) * static_cast<std::uint64_t>(s.W);
  const std::uint64_t hwp = static_cast<std::uint64_t>(s.Hp()) * static_cast<std::uint64_t>(s.Wp());

  std::uint64_t ifm_bytes = 0;
  switch (d.kind) {
    case LayerKind::Conv:
    case LayerKind::Fc:
      ifm_bytes = hwp * static_cast<std::uint64_t>(s.C / vector_factor_c(d.mode)) * 4;
      l.ifm_packing = "hwc-groups";
      break;
    case LayerKind::DwConv:
      ifm_bytes = hwp * static_cast<std::uint64_t>(s.C) * 4;
      l.ifm_packing = "hwc-lanes";
      break;
    case LayerKind::Residual:
    case LayerKind::Requant:
      ifm_bytes = hw * static_cast<std::uint64_t>(s.C) * static_cast<std::uint64_t>(elem_bits(l.ifm_kind) / 8);
      l.ifm_packing = l.ifm_kind == ElemKind::I16 ? "hwc-i16" : "hwc-i32";
      break;
  }
  if (d.is_mac()) {
    l.out_h = s.OH();
    l.out_w = s.OW();
    l.out_channels = s.M;
    l.steps = reduction_steps(d);
  } else {
    l.out_h = s.H;
    l.out_w = s.W;
    l.out_channels = s.C;
  }
  l.tiles = l.out_channels / kVectorFactorM;
  const std::uint64_t ofm_bytes = static_cast<std::uint64_t>(l.out_h) * static_cast<std::uint64_t>(l.out_w) * l.out_pixel_bytes();

  // Regions are vector aligned; elementwise regions are rounded up to whole
  // vectors because those kernels stream 1024-bit chunks.
  const bool chunked = d.kind == LayerKind::Residual;
  std::uint64_t cur = 0;
  l.ifm_addr = 0;
  l.ifm_bytes = static_cast<std::uint32_t>(chunked ? detail::align_up(ifm_bytes, kVecBytes) : ifm_bytes);
  cur = detail::align_up(l.ifm_bytes, kVecBytes);
  if (d.kind == LayerKind::Residual) {
    l.ifm2_addr = static_cast<std::uint32_t>(cur);
    l.ifm2_bytes = l.ifm_bytes;
    cur = detail::align_up(cur + l.ifm2_bytes, kVecBytes);
  }
  l.ofm_addr = static_cast<std::uint32_t>(cur);
  l.ofm_bytes = static_cast<std::uint32_t>(chunked ? detail::align_up(ofm_bytes, kVecBytes) : ofm_bytes);
  detail::check_capacity(m, "DMEM", static_cast<std::uint64_t>(l.ofm_addr) + l.ofm_bytes);

  if (d.is_mac()) {
    l.record_bytes = kVecBytes * static_cast<std::uint32_t>(2 + l.steps);
    l.param_bytes = l.record_bytes * static_cast<std::uint32_t>(l.tiles);
  } else if (d.kind == LayerKind::Requant) {
    l.record_bytes = kVecBytes;
    l.param_bytes = kVecBytes * static_cast<std::uint32_t>(l.tiles);
  }
  detail::check_capacity(m, "PMEM", static_cast<std::uint64_t>(l.param_addr) + l.param_bytes);
  return l;
}

// Order of the (r, s, c-group) reduction steps within one tile.
struct Step {
  int r = 0;
  int s = 0;
  int g = 0;
};

inline std::vector<Step> reduction_order(const LayerDesc& d) {
  const auto& sh = d.shape;
  const int groups = d.kind == LayerKind::DwConv ? 1 : sh.C / vector_factor_c(d.mode);
  const auto& lo = d.options.loop_order;
  auto extent = [&](char c) { return c == 'r' ? sh.R : c == 's' ? sh.S : groups; };
  std::vector<Step> out;
  for (int i0 = 0; i0 < extent(lo[0]); ++i0)
    for (int i1 = 0; i1 < extent(lo[1]); ++i1)
      for (int i2 = 0; i2 < extent(lo[2]); ++i2) {
        Step st;
        const int idx[3] = {i0, i1, i2};
        for (int k = 0; k < 3; ++k) {
          if (lo[k] == 'r') st.r = idx[k];
          else if (lo[k] == 's') st.s = idx[k];
          else st.g = idx[k];
        }
        out.push_back(st);
      }
  return out;
}

// ---------------------------------------------------------------- packing

namespace detail {

// Depthwise operands: one element per word at bit 0. Binary values use the
// ternary code so the ternary MAC computes the single product.
inline Word lane_element(MacMode mode, int v) {
  return packing::encode_element(mode == MacMode::B ? MacMode::T : mode, v);
}

inline void put_half(std::vector<Word>& w, std::size_t i, int v) {
  const auto h = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
  Word& x = w[i / 2];
  x = i % 2 ? (x & 0x0000ffffu) | (Word{h} << 16) : (x & 0xffff0000u) | h;
}

}  // namespace detail

// Memory contents for the layer operands as data directives.
inline std::vector<DataDirective> pack_tensors(const LayerDesc& d, const TensorLayout& l, const LayerTensors& t) {
  check_tensors(d, t);
  const auto& s = d.shape;
  std::vector<DataDirective> out;
  const auto at = [](std::size_t y, std::size_t x, std::size_t c, std::size_t W, std::size_t C) { return (y * W + x) * C + c; };

  // feature maps
  DataDirective ifm{"DMEM", l.ifm_addr, std::vector<Word>(l.ifm_bytes / 4, 0)};
  const auto Wp = static_cast<std::size_t>(s.Wp());
  const auto C = static_cast<std::size_t>(s.C);
  switch (d.kind) {
    case LayerKind::Conv:
    case LayerKind::Fc: {
      const int vc = vector_factor_c(d.mode);
      const std::size_t G = C / static_cast<std::size_t>(vc);
      for (int y = 0; y < s.H; ++y)
        for (int x = 0; x < s.W; ++x)
          for (std::size_t g = 0; g < G; ++g) {
            std::vector<int> v(static_cast<std::size_t>(vc));
            for (int e = 0; e < vc; ++e) v[e] = t.ifm[at(y, x, g * vc + e, s.W, C)];
            ifm.words[at(y + s.pad, x + s.pad, g, Wp, G)] = packing::pack_word(d.mode, v);
          }
      break;
    }
    case LayerKind::DwConv:
      // borders carry the code for -1 in binary mode, zero otherwise
      if (d.mode == MacMode::B) std::fill(ifm.words.begin(), ifm.words.end(), detail::lane_element(d.mode, -1));
      for (int y = 0; y < s.H; ++y)
        for (int x = 0; x < s.W; ++x)
          for (std::size_t c = 0; c < C; ++c)
            ifm.words[at(y + s.pad, x + s.pad, c, Wp, C)] = detail::lane_element(d.mode, t.ifm[at(y, x, c, s.W, C)]);
      break;
    case LayerKind::Residual:
    case LayerKind::Requant:
      for (std::size_t i = 0; i < t.ifm.size(); ++i) {
        if (l.ifm_kind == ElemKind::I16) detail::put_half(ifm.words, i, t.ifm[i]);
        else ifm.words[i] = static_cast<Word>(t.ifm[i]);
      }
      break;
  }
  out.push_back(std::move(ifm));
  if (d.kind == LayerKind::Residual) {
    DataDirective b{"DMEM", l.ifm2_addr, std::vector<Word>(l.ifm2_bytes / 4, 0)};
    for (std::size_t i = 0; i < t.ifm2.size(); ++i) {
      if (l.ifm_kind == ElemKind::I16) detail::put_half(b.words, i, t.ifm2[i]);
      else b.words[i] = static_cast<Word>(t.ifm2[i]);
    }
    out.push_back(std::move(b));
  }
  if (l.param_bytes == 0) return out;

  // parameter records
  DataDirective p{"PMEM", l.param_addr, std::vector<Word>(l.param_bytes / 4, 0)};
  const std::size_t rec_words = l.record_bytes / 4;
  const auto steps = d.is_mac() ? reduction_order(d) : std::vector<Step>{};
  const int vc = vector_factor_c(d.mode);
  for (int tile = 0; tile < l.tiles; ++tile) {
    Word* rec = p.words.data() + static_cast<std::size_t>(tile) * rec_words;
    const auto& q = d.quant_for(tile);
    rec[0] = static_cast<Word>(d.target == QuantTarget::I8 ? q.mult : q.threshold);
    rec[1] = static_cast<Word>(q.shift);
    rec[2] = static_cast<Word>(q.zp);
    if (!d.is_mac()) continue;
    for (int m = 0; m < kLanes; ++m) {
      const std::size_t oc = static_cast<std::size_t>(tile) * kLanes + static_cast<std::size_t>(m);
      rec[32 + m] = t.bias.empty() ? 0u : static_cast<Word>(t.bias[oc]);
      for (std::size_t j = 0; j < steps.size(); ++j) {
        const auto& st = steps[j];
        Word w = 0;
        if (d.kind == LayerKind::DwConv) {
          w = detail::lane_element(d.mode, t.weights[(oc * s.R + st.r) * s.S + st.s]);
        } else {
          std::vector<int> v(static_cast<std::size_t>(vc));
          for (int e = 0; e < vc; ++e)
            v[e] = t.weights[((oc * s.R + st.r) * s.S + st.s) * C + static_cast<std::size_t>(st.g * vc + e)];
          w = packing::pack_word(d.mode, v);
        }
        rec[64 + 32 * j + m] = w;
      }
    }
  }
  out.push_back(std::move(p));
  return out;
}

}  // namespace braintta
