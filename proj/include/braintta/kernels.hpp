#pragma once

// Move-program generators for the supported layer kinds.
//
// Conv/fc run an output-stationary schedule: for every output pixel and every
// 32-channel output tile the accumulators are seeded from the bias, then J
// reduction steps each load one activation word (DMEM), broadcast it, load
// one weight vector (PMEM) and trigger the vMAC. The tile body is J + 6
// instructions and runs from the loopbuffer when it fits; otherwise the tile
// loop is a guarded jump on a counter.
//
// Tile body timeline (cycle k within the body):
//   j        salu: activation address for step j
//   j+1      lsud ld32
//   j+2      vops bcast          lsup ld weight j
//   j+3      vmac mac
//   0..J+1   salu2 streams the PMEM record pointer (params, bias, weights)
//   1 / 2    params -> vops.b / bias -> initacc
//   J+3      rd16 or rd32        J+4 requant        J+5 store

#include <map>
#include <string>
#include <vector>

#include "braintta/assembler.hpp"
#include "braintta/config.hpp"
#include "braintta/isa.hpp"
#include "braintta/layer.hpp"
#include "braintta/layout.hpp"
#include "braintta/validate.hpp"

namespace braintta {

struct Generated {
  Program program;
  TensorLayout layout;
};

namespace detail {

// Collects moves per instruction and assigns them to buses of the right
// domain. Output goes through the assembler.
class AsmBuilder {
 public:
  explicit AsmBuilder(const MachineConfig& m) : m_(m) {
    for (std::size_t b = 0; b < m.buses.size(); ++b)
      (domain_of(m.buses[b].width) == Domain::Vector ? vbus_ : sbus_).push_back(static_cast<int>(b));
  }

  struct Ins {
    std::vector<std::string> s;  // scalar-bus moves
    std::vector<std::string> v;  // vector-bus moves
    std::string label;
  };

  // A block of instructions addressed by cycle offset.
  struct Block {
    std::vector<Ins> ins;
    explicit Block(int n) : ins(static_cast<std::size_t>(n)) {}
    void s(int c, std::string mv) { ins.at(static_cast<std::size_t>(c)).s.push_back(std::move(mv)); }
    void v(int c, std::string mv) { ins.at(static_cast<std::size_t>(c)).v.push_back(std::move(mv)); }
    int size() const { return static_cast<int>(ins.size()); }
  };

  void append(const Block& b, const std::string& label = "") {
    for (std::size_t i = 0; i < b.ins.size(); ++i) {
      Ins in = b.ins[i];
      if (i == 0 && !label.empty()) in.label = label;
      code_.push_back(std::move(in));
    }
  }
  void one(std::vector<std::string> s, std::vector<std::string> v = {}, std::string label = "") {
    code_.push_back({std::move(s), std::move(v), std::move(label)});
  }

  std::string text() const {
    std::string out;
    for (const auto& in : code_) {
      if (!in.label.empty()) out += in.label + ":\n";
      if (in.s.size() > sbus_.size() || in.v.size() > vbus_.size())
        throw LayerError("kernel needs more buses than the machine provides");
      std::vector<std::string> slots(m_.buses.size());
      for (std::size_t i = 0; i < in.s.size(); ++i) slots[static_cast<std::size_t>(sbus_[i])] = in.s[i];
      for (std::size_t i = 0; i < in.v.size(); ++i) slots[static_cast<std::size_t>(vbus_[i])] = in.v[i];
      if (in.s.empty() && in.v.empty()) {
        out += "nop ;\n";
        continue;
      }
      for (std::size_t i = 0; i < slots.size(); ++i) out += (i ? " " : "") + slots[i] + (slots[i].empty() ? ";" : " ;");
      out += "\n";
    }
    return out;
  }

  Program build() const {
    Program p = parse_asm(text(), m_);
    if (const auto diags = validate(p, m_); !diags.empty())
      throw LayerError("generated kernel does not validate: " + format_diagnostic(diags.front()));
    return p;
  }

 private:
  const MachineConfig& m_;
  std::vector<int> sbus_, vbus_;
  std::vector<Ins> code_;
};

inline std::string imm(long long v) { return "#" + std::to_string(v); }

inline std::string ld_op(int words) { return "ld" + std::to_string(32 * words); }
inline std::string st_op(int words) { return "st" + std::to_string(32 * words); }

inline std::string quant_op(QuantTarget t) {
  switch (t) {
    case QuantTarget::I8: return "qi8";
    case QuantTarget::B: return "qb";
    case QuantTarget::T: return "qt";
    case QuantTarget::None: break;
  }
  return "";
}

inline std::string mac_op(const LayerDesc& d) {
  if (d.kind == LayerKind::DwConv && d.mode == MacMode::B) return "mact";
  return d.mode == MacMode::B ? "macb" : d.mode == MacMode::T ? "mact" : "mac8";
}

// Stores a finished tile held in `src_vec` (or its lane 0 for single-word
// outputs) at the address in rf.3.
inline void store_tile(AsmBuilder::Block& b, int c, ElemKind k, const std::string& fu) {
  const int words = static_cast<int>(tile_bytes(k) / 4);
  if (words == 1) {
    b.s(c, fu + ".sout -> lsud.data");
  } else {
    b.v(c, fu + ".out -> lsud.vdata");
  }
  b.s(c, "rf.3 -> lsud.t." + st_op(words));
}

// Pixel loop around `body`. The pixel head may add moves into the first
// instruction; `pix_step` is the rf.1 advance per pixel after the body ran,
// `row_extra` the additional advance at the end of a row.
struct PixelLoop {
  int oh = 1;
  int ow = 1;
  long long pix_step = 0;
  long long row_extra = 0;
};

inline void emit_pixel_loop(AsmBuilder& a, const PixelLoop& pl, const AsmBuilder::Block& head,
                            const AsmBuilder::Block& body, const std::string& body_label) {
  a.one({imm(pl.ow) + " -> rf.5", imm(pl.oh) + " -> rf.7"});
  a.append(head, "pix");
  a.append(body, body_label);
  // pixel epilogue: advance the activation base, count down the row
  a.one({imm(pl.pix_step) + " -> salu.a", "rf.1 -> salu.t.add", "rf.5 -> salu2.a", "#1 -> salu2.t.eq"});
  a.one({"salu.out -> rf.1", "salu2.out -> b.0", "rf.5 -> salu2.a", "#1 -> salu2.t.sub"});
  a.one({"salu2.out -> rf.5", "!b0 #pix -> cu.t.jump"});
  // row epilogue
  a.one({imm(pl.row_extra) + " -> salu.a", "rf.1 -> salu.t.add", imm(pl.ow) + " -> rf.5", "rf.7 -> salu2.a",
         "#1 -> salu2.t.eq"});
  a.one({"salu.out -> rf.1", "salu2.out -> b.1", "rf.7 -> salu2.a", "#1 -> salu2.t.sub"});
  a.one({"salu2.out -> rf.7", "!b1 #pix -> cu.t.jump"});
  a.one({"#0 -> cu.t.halt"});
}

// Guarded-jump tile counter in rf.6, using salu at cycles c and c+1.
inline void tile_counter(AsmBuilder::Block& b, int c, int jump_cycle) {
  b.s(c, "rf.6 -> salu.a");
  b.s(c, "#1 -> salu.t.eq");
  b.s(c + 1, "salu.out -> b.1");
  b.s(c + 1, "rf.6 -> salu.a");
  b.s(c + 1, "#1 -> salu.t.sub");
  b.s(c + 2, "salu.out -> rf.6");
  b.s(jump_cycle, "!b1 #tile -> cu.t.jump");
}

inline void check_kind(const LayerDesc& d, std::initializer_list<LayerKind> ok, const char* fn) {
  for (auto k : ok)
    if (d.kind == k) return;
  throw LayerError(std::string(fn) + ": unsupported layer kind '" + std::string(to_string(d.kind)) + "'");
}

// Conv, fc and depthwise share the pixel/tile structure.
inline Generated gen_mac_layer(const LayerDesc& d, const MachineConfig& m) {
  const TensorLayout l = layout_tensors(d, m);
  const auto& sh = d.shape;
  const bool dw = d.kind == LayerKind::DwConv;
  const int J = l.steps;
  const int tiles = l.tiles;
  const auto steps = reduction_order(d);
  const bool quant = d.target != QuantTarget::None;
  const std::string rd = d.reads_16bit() ? "rd16" : "rd32";
  const std::string mac = mac_op(d);
  const int store_c = quant ? J + 5 : J + 4;
  const int body_len = store_c + 1;
  const bool hw_loop = body_len <= m.loopbuffer_entries;
  const std::uint32_t out_tb = l.out_tile_bytes;

  // words per padded input pixel and per activation element offset
  const long long pix_words = dw ? sh.C : sh.C / vector_factor_c(d.mode);
  const long long Wp = sh.Wp();
  auto act_off = [&](const Step& st) { return ((st.r * Wp + st.s) * pix_words + st.g) * 4; };

  // Weight vectors live in the vector RFs when requested and they fit.
  int vrf_regs = 0;
  for (const auto& rf : m.rfs)
    if (domain_of(rf.width) == Domain::Vector) vrf_regs += rf.entries;
  const bool in_vrf = d.options.weights_in_vrf && tiles * J <= vrf_regs;
  auto vreg = [&](int k) {
    int idx = k;
    for (const auto& rf : m.rfs) {
      if (domain_of(rf.width) != Domain::Vector) continue;
      if (idx < rf.entries) return rf.name + "." + std::to_string(idx);
      idx -= rf.entries;
    }
    throw LayerError("vector register index out of range");
  };

  AsmBuilder a(m);
  a.one({imm(l.ifm_addr) + " -> rf.1", imm(l.ofm_addr) + " -> rf.3"});
  if (in_vrf) {
    // preload: weight k of tile t at cycle i, move at i+1
    const int n = tiles * J;
    AsmBuilder::Block pre(n + 1);
    for (int t = 0; t < tiles; ++t)
      for (int j = 0; j < J; ++j) {
        const int k = t * J + j;
        const long long addr = l.param_addr + static_cast<long long>(t) * l.record_bytes + kVecBytes * (2 + j);
        pre.s(k, imm(addr) + " -> lsup.t.ld1024");
        pre.v(k + 1, "lsup.vout -> " + vreg(k));
      }
    a.append(pre);
  }

  // One tile body; `t` is only used when tiles are unrolled.
  auto tile_body = [&](int t) {
    AsmBuilder::Block b(body_len);
    if (in_vrf) {
      const long long rec = l.param_addr + static_cast<long long>(t) * l.record_bytes;
      b.s(0, imm(rec) + " -> lsup.t.ld128");
      b.s(1, imm(rec + kVecBytes) + " -> lsup.t.ld1024");
    } else {
      for (int c = 0; c <= J + 1; ++c) {
        b.s(c, "salu2.out -> lsup.t." + (c == 0 ? ld_op(4) : ld_op(32)));
        b.s(c, "salu2.out -> salu2.t.add");
      }
    }
    b.v(1, "lsup.vout -> vops.b");
    b.v(2, "lsup.vout -> vmac.t.initacc");
    for (int j = 0; j < J; ++j) {
      const long long off = act_off(steps[static_cast<std::size_t>(j)]);
      const std::string wsrc = in_vrf ? vreg(t * J + j) : "lsup.vout";
      if (dw) {
        b.s(j + 1, imm(off) + " -> salu.a");
        b.s(j + 1, "rf.1 -> salu.t.add");
        b.s(j + 2, "salu.out -> lsud.t.ld1024");
        b.v(j + 3, "lsud.vout -> vmac.a");
      } else {
        b.s(j, imm(off) + " -> salu.a");
        b.s(j, "rf.1 -> salu.t.add");
        b.s(j + 1, "salu.out -> lsud.t.ld32");
        b.s(j + 2, "lsud.out -> vops.t.bcast");
        b.v(j + 3, "vops.out -> vmac.a");
      }
      b.v(j + 3, wsrc + " -> vmac.t." + mac);
    }
    b.s(J + 3, "#0 -> vmac.t." + rd);
    if (quant) b.v(J + 4, "vmac.out -> vops.t." + quant_op(d.target));
    store_tile(b, store_c, l.ofm_kind, quant ? "vops" : "vmac");
    // output pointer
    b.s(store_c - 1, imm(out_tb) + " -> salu.a");
    b.s(store_c - 1, "rf.3 -> salu.t.add");
    b.s(store_c, "salu.out -> rf.3");
    if (dw) {
      // next channel tile of the same pixel
      b.s(J + 2, imm(kVecBytes) + " -> salu.a");
      b.s(J + 2, "rf.1 -> salu.t.add");
      b.s(J + 3, "salu.out -> rf.1");
    }
    return b;
  };

  // head: reset the PMEM stream and start the tile loop
  AsmBuilder::Block head(1);
  if (!in_vrf) {
    head.s(0, "#128 -> salu2.a");
    head.s(0, imm(static_cast<long long>(l.param_addr) - 128) + " -> salu2.t.add");
  }
  AsmBuilder::Block body(0);
  std::string body_label;
  if (in_vrf) {
    for (int t = 0; t < tiles; ++t) {
      auto tb = tile_body(t);
      body.ins.insert(body.ins.end(), tb.ins.begin(), tb.ins.end());
    }
  } else if (hw_loop) {
    head.s(0, imm(tiles) + " -> cu.iter");
    head.s(0, imm(body_len) + " -> cu.t.loop");
    body = tile_body(0);
  } else {
    head.s(0, imm(tiles) + " -> rf.6");
    if (dw) throw LayerError("depthwise tile body of " + std::to_string(body_len) + " instructions exceeds the loopbuffer");
    body = tile_body(0);
    // salu is free right after the activation stream
    tile_counter(body, J, store_c);
    body_label = "tile";
  }

  PixelLoop pl;
  pl.oh = l.out_h;
  pl.ow = l.out_w;
  pl.pix_step = static_cast<long long>(sh.stride) * pix_words * 4 - (dw ? static_cast<long long>(tiles) * kVecBytes : 0);
  pl.row_extra = (static_cast<long long>(sh.stride) * Wp - static_cast<long long>(l.out_w) * sh.stride) * pix_words * 4;
  emit_pixel_loop(a, pl, head, body, body_label);
  return {a.build(), l};
}

}  // namespace detail

inline Generated gen_conv(const LayerDesc& d, const MachineConfig& m) {
  detail::check_kind(d, {LayerKind::Conv}, "gen_conv");
  return detail::gen_mac_layer(d, m);
}

inline Generated gen_fc(const LayerDesc& d, const MachineConfig& m) {
  detail::check_kind(d, {LayerKind::Fc}, "gen_fc");
  return detail::gen_mac_layer(d, m);
}

inline Generated gen_dwconv(const LayerDesc& d, const MachineConfig& m) {
  detail::check_kind(d, {LayerKind::DwConv}, "gen_dwconv");
  return detail::gen_mac_layer(d, m);
}

// Streams vector chunks: one shared offset in rf.1 indexes both operands
// and the output.
inline Generated gen_residual(const LayerDesc& d, const MachineConfig& m) {
  detail::check_kind(d, {LayerKind::Residual}, "gen_residual");
  const TensorLayout l = layout_tensors(d, m);
  // add16 covers 32 halfwords, so e16 streams 512-bit chunks
  const bool e16 = d.elem_width == funits::WidthMode::E16;
  const int chunk_words = e16 ? 16 : 32;
  const int chunks = static_cast<int>(l.ifm_bytes / (4u * chunk_words));
  const std::string add = e16 ? "add16" : "add32";
  using detail::imm;
  detail::AsmBuilder a(m);
  a.one({"#0 -> rf.1", imm(chunks) + " -> cu.iter", "#5 -> cu.t.loop"});
  detail::AsmBuilder::Block b(5);
  b.s(0, "rf.1 -> salu.a");
  b.s(0, imm(l.ifm_addr) + " -> salu.t.add");
  b.s(0, "rf.1 -> salu2.a");
  b.s(0, imm(l.ifm2_addr) + " -> salu2.t.add");
  b.s(1, "salu.out -> lsud.t." + detail::ld_op(chunk_words));
  b.s(1, "rf.1 -> salu.a");
  b.s(1, imm(l.ofm_addr) + " -> salu.t.add");
  b.s(2, "salu2.out -> lsud.t." + detail::ld_op(chunk_words));
  b.v(2, "lsud.vout -> vadd.b");
  b.s(2, "salu.out -> rf.4");
  b.s(2, imm(4 * chunk_words) + " -> salu2.a");
  b.s(2, "rf.1 -> salu2.t.add");
  b.v(3, "lsud.vout -> vadd.t." + add);
  b.s(3, "salu2.out -> rf.1");
  b.v(4, "vadd.out -> lsud.vdata");
  b.s(4, "rf.4 -> lsud.t." + detail::st_op(chunk_words));
  a.append(b);
  a.one({"#0 -> cu.t.halt"});
  return {a.build(), l};
}

// Channel groups outer (unrolled, constants latched in vops.b), pixels inner.
inline Generated gen_requant(const LayerDesc& d, const MachineConfig& m) {
  detail::check_kind(d, {LayerKind::Requant}, "gen_requant");
  const TensorLayout l = layout_tensors(d, m);
  const auto& sh = d.shape;
  const long long pixels = static_cast<long long>(sh.H) * sh.W;
  const int in_words = elem_bits(l.ifm_kind);  // a 32-element group is 32 or 16 words
  const long long in_pix = static_cast<long long>(sh.C) * elem_bits(l.ifm_kind) / 8;
  const long long out_pix = l.out_pixel_bytes();
  using detail::imm;
  detail::AsmBuilder a(m);
  for (int g = 0; g < l.tiles; ++g) {
    a.one({imm(l.param_addr + static_cast<long long>(g) * kVecBytes) + " -> lsup.t.ld128",
           imm(l.ifm_addr + static_cast<long long>(g) * in_words * 4) + " -> rf.1",
           imm(l.ofm_addr + static_cast<long long>(g) * l.out_tile_bytes) + " -> rf.3"});
    a.one({imm(pixels) + " -> cu.iter", "#3 -> cu.t.loop"}, {"lsup.vout -> vops.b"});
    detail::AsmBuilder::Block b(3);
    b.s(0, "rf.1 -> lsud.t." + detail::ld_op(in_words));
    b.s(0, imm(in_pix) + " -> salu.a");
    b.s(0, "rf.1 -> salu.t.add");
    b.v(1, "lsud.vout -> vops.t." + detail::quant_op(d.target));
    b.s(1, "salu.out -> rf.1");
    b.s(1, imm(out_pix) + " -> salu2.a");
    b.s(1, "rf.3 -> salu2.t.add");
    detail::store_tile(b, 2, l.ofm_kind, "vops");
    b.s(2, "salu2.out -> rf.3");
    a.append(b);
  }
  a.one({"#0 -> cu.t.halt"});
  return {a.build(), l};
}

inline Generated gen_layer(const LayerDesc& d, const MachineConfig& m) {
  switch (d.kind) {
    case LayerKind::Conv: return gen_conv(d, m);
    case LayerKind::DwConv: return gen_dwconv(d, m);
    case LayerKind::Fc: return gen_fc(d, m);
    case LayerKind::Residual: return gen_residual(d, m);
    case LayerKind::Requant: return gen_requant(d, m);
  }
  throw LayerError("unknown layer kind");
}

}  // namespace braintta
