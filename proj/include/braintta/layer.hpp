#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "braintta/config.hpp"
#include "braintta/funits.hpp"
#include "braintta/vec.hpp"

namespace braintta {

struct LayerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LayerKind : std::uint8_t { Conv, DwConv, Fc, Residual, Requant };
enum class QuantTarget : std::uint8_t { None, I8, T, B };

// Element encodings that appear in memory.
enum class ElemKind : std::uint8_t { B, T, I8, I16, I32 };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::DwConv: return "dwconv";
    case LayerKind::Fc: return "fc";
    case LayerKind::Residual: return "residual";
    case LayerKind::Requant: return "requant";
  }
  return "?";
}

inline LayerKind parse_layer_kind(std::string_view s) {
  for (auto k : {LayerKind::Conv, LayerKind::DwConv, LayerKind::Fc, LayerKind::Residual, LayerKind::Requant})
    if (to_string(k) == s) return k;
  throw LayerError("unknown layer kind '" + std::string(s) + "'");
}

inline std::string_view to_string(QuantTarget t) {
  switch (t) {
    case QuantTarget::None: return "none";
    case QuantTarget::I8: return "i8";
    case QuantTarget::T: return "t";
    case QuantTarget::B: return "b";
  }
  return "?";
}

inline QuantTarget parse_quant_target(std::string_view s) {
  for (auto t : {QuantTarget::None, QuantTarget::I8, QuantTarget::T, QuantTarget::B})
    if (to_string(t) == s) return t;
  throw LayerError("unknown requantization target '" + std::string(s) + "'");
}

inline std::string_view to_string(funits::WidthMode w) { return w == funits::WidthMode::E16 ? "e16" : "e32"; }

inline funits::WidthMode parse_width_mode(std::string_view s) {
  if (s == "e16") return funits::WidthMode::E16;
  if (s == "e32") return funits::WidthMode::E32;
  throw LayerError("unknown element width '" + std::string(s) + "' (expected e16 or e32)");
}

constexpr int elem_bits(ElemKind k) {
  switch (k) {
    case ElemKind::B: return 1;
    case ElemKind::T: return 2;
    case ElemKind::I8: return 8;
    case ElemKind::I16: return 16;
    case ElemKind::I32: return 32;
  }
  return 0;
}

constexpr ElemKind elem_kind_of(MacMode m) {
  return m == MacMode::B ? ElemKind::B : m == MacMode::T ? ElemKind::T : ElemKind::I8;
}

struct LayerShape {
  int W = 1;
  int H = 1;
  int C = 1;
  int M = 1;
  int R = 1;
  int S = 1;
  int stride = 1;
  int pad = 0;

  int OH() const { return (H + 2 * pad - R) / stride + 1; }
  int OW() const { return (W + 2 * pad - S) / stride + 1; }
  int Hp() const { return H + 2 * pad; }
  int Wp() const { return W + 2 * pad; }
};

// Requantization constants for one 32-channel group.
struct QuantParams {
  std::int32_t mult = 1;
  int shift = 0;
  int zp = 0;
  int threshold = 0;
  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

// Kernel-generator knobs.
struct GenOptions {
  std::string loop_order = "rsc";  // reduction loops, outermost first: r, s, c(hannel group)
  bool weights_in_vrf = false;     // preload all weight vectors into the vector RFs when they fit
};

struct LayerDesc {
  LayerKind kind = LayerKind::Conv;
  MacMode mode = MacMode::B;
  LayerShape shape;
  QuantTarget target = QuantTarget::None;
  std::vector<QuantParams> quant{QuantParams{}};  // one entry, or one per output-channel group
  std::optional<std::vector<std::int32_t>> bias;
  funits::WidthMode elem_width = funits::WidthMode::E32;  // residual only
  GenOptions options;

  // Output-channel groups of 32.
  int groups() const {
    return kind == LayerKind::Conv || kind == LayerKind::Fc ? shape.M / kVectorFactorM : shape.C / kVectorFactorM;
  }
  const QuantParams& quant_for(int group) const { return quant.size() == 1 ? quant[0] : quant.at(group); }

  bool is_mac() const { return kind == LayerKind::Conv || kind == LayerKind::DwConv || kind == LayerKind::Fc; }

  // Accumulator read width used before storing or requantizing.
  bool reads_16bit() const {
    if (target == QuantTarget::B || target == QuantTarget::T) return true;
    if (target == QuantTarget::I8) return false;
    return mode != MacMode::I8;
  }

  ElemKind input_kind() const {
    if (kind == LayerKind::Residual) return elem_width == funits::WidthMode::E16 ? ElemKind::I16 : ElemKind::I32;
    if (kind == LayerKind::Requant) return target == QuantTarget::I8 ? ElemKind::I32 : ElemKind::I16;
    return elem_kind_of(mode);
  }

  ElemKind output_kind() const {
    if (kind == LayerKind::Residual) return input_kind();
    switch (target) {
      case QuantTarget::B: return ElemKind::B;
      case QuantTarget::T: return ElemKind::T;
      case QuantTarget::I8: return ElemKind::I8;
      case QuantTarget::None: break;
    }
    return reads_16bit() ? ElemKind::I16 : ElemKind::I32;
  }
};

// Throws LayerError naming the violated constraint.
inline void check_layer(const LayerDesc& d) {
  const auto& s = d.shape;
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw LayerError(msg);
  };
  need(s.W >= 1 && s.H >= 1 && s.C >= 1 && s.M >= 1 && s.R >= 1 && s.S >= 1 && s.stride >= 1 && s.pad >= 0,
       "layer dimensions must be positive");
  const int vc = vector_factor_c(d.mode);
  switch (d.kind) {
    case LayerKind::Fc:
      need(s.W == 1 && s.H == 1 && s.R == 1 && s.S == 1 && s.pad == 0 && s.stride == 1,
           "fc layers take a flattened input: W = H = R = S = 1");
      [[fallthrough]];
    case LayerKind::Conv:
      need(s.C % vc == 0, "C = " + std::to_string(s.C) + " is not a multiple of v_C = " + std::to_string(vc) +
                              " for mode " + std::string(to_string(d.mode)));
      need(s.M % kVectorFactorM == 0,
           "M = " + std::to_string(s.M) + " is not a multiple of v_M = " + std::to_string(kVectorFactorM));
      break;
    case LayerKind::DwConv:
      need(s.C % kVectorFactorM == 0,
           "depthwise C = " + std::to_string(s.C) + " is not a multiple of v_M = " + std::to_string(kVectorFactorM));
      need(s.M == s.C, "depthwise layers need M == C");
      break;
    case LayerKind::Residual:
    case LayerKind::Requant:
      need(s.C % kVectorFactorM == 0, "C = " + std::to_string(s.C) + " is not a multiple of 32");
      need(s.R == 1 && s.S == 1 && s.pad == 0 && s.stride == 1, "elementwise layers have no kernel window");
      if (d.kind == LayerKind::Requant) need(d.target != QuantTarget::None, "requant layer needs a target");
      break;
  }
  if (d.is_mac()) {
    need(s.H + 2 * s.pad >= s.R && s.W + 2 * s.pad >= s.S, "kernel larger than the padded input");
    need((s.H + 2 * s.pad - s.R) % s.stride == 0 && (s.W + 2 * s.pad - s.S) % s.stride == 0,
         "output size (H + 2*pad - R)/stride + 1 is not integral");
    if (d.kind == LayerKind::DwConv || d.kind == LayerKind::Conv || d.kind == LayerKind::Fc)
      if (d.bias) need(static_cast<int>(d.bias->size()) == s.M, "bias must have one entry per output channel");
  }
  const int g = d.groups();
  need(d.quant.size() == 1 || static_cast<int>(d.quant.size()) == g,
       "quant parameters must be given once or once per 32-channel group");
  for (const auto& q : d.quant) {
    need(q.shift >= 0 && q.shift <= 31, "requant shift must be in [0,31]");
    need(q.zp >= -128 && q.zp <= 127, "requant zero point must fit int8");
    need(q.threshold >= -32768 && q.threshold <= 32767, "threshold must fit int16");
    if (d.target == QuantTarget::T) need(q.threshold >= 0, "ternary threshold must be non-negative");
  }
  const auto& lo = d.options.loop_order;
  need(lo.size() == 3 && lo.find('r') != std::string::npos && lo.find('s') != std::string::npos &&
           lo.find('c') != std::string::npos,
       "loop_order must be a permutation of \"rsc\"");
}

// ---------------------------------------------------------------- JSON

inline constexpr const char* kLayerSchema = "braintta.layer/1";

inline nlohmann::json to_json(const LayerDesc& d) {
  nlohmann::json j;
  j["schema"] = kLayerSchema;
  j["kind"] = std::string(to_string(d.kind));
  j["mode"] = std::string(to_string(d.mode));
  const auto& s = d.shape;
  j["shape"] = {{"W", s.W}, {"H", s.H}, {"C", s.C}, {"M", s.M}, {"R", s.R}, {"S", s.S}, {"stride", s.stride}, {"pad", s.pad}};
  j["quant"]["target"] = std::string(to_string(d.target));
  for (const auto& q : d.quant)
    j["quant"]["params"].push_back({{"mult", q.mult}, {"shift", q.shift}, {"zp", q.zp}, {"threshold", q.threshold}});
  if (d.bias) j["bias"] = *d.bias;
  j["elem_width"] = std::string(to_string(d.elem_width));
  j["options"] = {{"loop_order", d.options.loop_order}, {"weights_in_vrf", d.options.weights_in_vrf}};
  return j;
}

inline LayerDesc layer_from_json(const nlohmann::json& j) {
  LayerDesc d;
  try {
    if (j.contains("schema") && j.at("schema") != kLayerSchema)
      throw LayerError("unsupported layer schema '" + j.at("schema").get<std::string>() + "'");
    d.kind = parse_layer_kind(j.at("kind").get<std::string>());
    d.mode = parse_mode(j.value("mode", std::string("b")));
    const auto& s = j.at("shape");
    d.shape.W = s.value("W", 1);
    d.shape.H = s.value("H", 1);
    d.shape.C = s.value("C", 1);
    d.shape.M = s.value("M", d.kind == LayerKind::DwConv || d.kind == LayerKind::Residual || d.kind == LayerKind::Requant
                                 ? d.shape.C
                                 : 1);
    d.shape.R = s.value("R", 1);
    d.shape.S = s.value("S", 1);
    d.shape.stride = s.value("stride", 1);
    d.shape.pad = s.value("pad", 0);
    if (j.contains("quant")) {
      const auto& q = j.at("quant");
      d.target = parse_quant_target(q.value("target", std::string("none")));
      if (q.contains("params")) {
        d.quant.clear();
        for (const auto& p : q.at("params"))
          d.quant.push_back({p.value("mult", 1), p.value("shift", 0), p.value("zp", 0), p.value("threshold", 0)});
      }
    }
    if (j.contains("bias")) d.bias = j.at("bias").get<std::vector<std::int32_t>>();
    d.elem_width = parse_width_mode(j.value("elem_width", std::string("e32")));
    if (j.contains("options")) {
      const auto& o = j.at("options");
      d.options.loop_order = o.value("loop_order", d.options.loop_order);
      d.options.weights_in_vrf = o.value("weights_in_vrf", d.options.weights_in_vrf);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LayerError(std::string("malformed layer descriptor: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw LayerError(e.what());
  }
  check_layer(d);
  return d;
}

// ---------------------------------------------------------------- tensors

// Unpacked layer operands.
//   ifm, ifm2: [H][W][C]
//   weights:   conv [M][R][S][C], dwconv [C][R][S], fc [M][C]
//   bias:      [M], empty means zero
struct LayerTensors {
  std::vector<int> ifm;
  std::vector<int> ifm2;
  std::vector<int> weights;
  std::vector<std::int32_t> bias;
  friend bool operator==(const LayerTensors&, const LayerTensors&) = default;
};

inline std::size_t ifm_elems(const LayerDesc& d) {
  return static_cast<std::size_t>(d.shape.H) * static_cast<std::size_t>(d.shape.W) * static_cast<std::size_t>(d.shape.C);
}

inline std::size_t weight_elems(const LayerDesc& d) {
  const auto& s = d.shape;
  const auto win = static_cast<std::size_t>(s.R) * static_cast<std::size_t>(s.S);
  switch (d.kind) {
    case LayerKind::Conv:
    case LayerKind::Fc: return static_cast<std::size_t>(s.M) * static_cast<std::size_t>(s.C) * win;
    case LayerKind::DwConv: return static_cast<std::size_t>(s.C) * win;
    default: return 0;
  }
}

inline std::pair<int, int> elem_range(ElemKind k) {
  switch (k) {
    case ElemKind::B: return {-1, 1};
    case ElemKind::T: return {-1, 1};
    case ElemKind::I8: return {-128, 127};
    case ElemKind::I16: return {-32768, 32767};
    case ElemKind::I32: return {std::numeric_limits<int>::min(), std::numeric_limits<int>::max()};
  }
  return {0, 0};
}

inline void check_tensors(const LayerDesc& d, const LayerTensors& t) {
  if (t.ifm.size() != ifm_elems(d)) throw LayerError("ifm has " + std::to_string(t.ifm.size()) + " elements, expected " + std::to_string(ifm_elems(d)));
  if (d.kind == LayerKind::Residual && t.ifm2.size() != ifm_elems(d))
    throw LayerError("second residual operand has the wrong size");
  if (t.weights.size() != weight_elems(d))
    throw LayerError("weights have " + std::to_string(t.weights.size()) + " elements, expected " + std::to_string(weight_elems(d)));
  if (!t.bias.empty() && static_cast<int>(t.bias.size()) != d.shape.M) throw LayerError("bias must have M entries");
  const auto in_kind = d.input_kind();
  const auto [lo, hi] = elem_range(in_kind);
  auto in_domain = [&](int v) { return v >= lo && v <= hi && !(in_kind == ElemKind::B && v == 0); };
  for (int v : t.ifm)
    if (!in_domain(v)) throw LayerError("ifm element " + std::to_string(v) + " outside the " + std::string(to_string(d.mode)) + " domain");
  for (int v : t.ifm2)
    if (!in_domain(v)) throw LayerError("ifm2 element " + std::to_string(v) + " out of range");
  if (d.is_mac()) {
    const auto [wl, wh] = elem_range(elem_kind_of(d.mode));
    for (int v : t.weights)
      if (v < wl || v > wh || (d.mode == MacMode::B && v == 0))
        throw LayerError("weight " + std::to_string(v) + " outside the " + std::string(to_string(d.mode)) + " domain");
  }
}

// Uniform random operands in each element's domain.
inline LayerTensors random_tensors(const LayerDesc& d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto draw = [&](ElemKind k) {
    if (k == ElemKind::B) return std::uniform_int_distribution<int>(0, 1)(rng) ? 1 : -1;
    if (k == ElemKind::I32) return std::uniform_int_distribution<int>(-(1 << 20), 1 << 20)(rng);
    const auto [lo, hi] = elem_range(k);
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  LayerTensors t;
  const auto in_kind = d.input_kind();
  t.ifm.resize(ifm_elems(d));
  for (auto& v : t.ifm) v = draw(in_kind);
  if (d.kind == LayerKind::Residual) {
    t.ifm2.resize(ifm_elems(d));
    for (auto& v : t.ifm2) v = draw(in_kind);
  }
  if (d.is_mac()) {
    t.weights.resize(weight_elems(d));
    for (auto& v : t.weights) v = draw(elem_kind_of(d.mode));
    const int b = d.mode == MacMode::I8 ? 1 << 14 : 64;
    t.bias.resize(static_cast<std::size_t>(d.shape.M));
    for (auto& v : t.bias) v = std::uniform_int_distribution<int>(-b, b)(rng);
  }
  return t;
}

// Random legal layer of the given kind, bounded to small shapes.
inline LayerDesc random_layer(LayerKind kind, MacMode mode, std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  LayerDesc d;
  d.kind = kind;
  d.mode = mode;
  auto& s = d.shape;
  const int vc = vector_factor_c(mode);
  switch (kind) {
    case LayerKind::Conv:
    case LayerKind::DwConv: {
      s.C = kind == LayerKind::Conv ? vc * pick(1, 4) : 32 * pick(1, 2);
      s.M = kind == LayerKind::Conv ? 32 * pick(1, 2) : s.C;
      s.R = pick(1, 3);
      s.S = pick(1, 3);
      s.stride = pick(1, 2);
      s.pad = pick(0, 1);
      // W, H chosen so the output size is integral
      auto dim = [&](int k) {
        for (;;) {
          const int x = pick(1, 12);
          if (x + 2 * s.pad >= k && (x + 2 * s.pad - k) % s.stride == 0) return x;
        }
      };
      s.H = dim(s.R);
      s.W = dim(s.S);
      break;
    }
    case LayerKind::Fc:
      s.C = vc * pick(1, 4);
      s.M = 32 * pick(1, 2);
      break;
    case LayerKind::Residual:
    case LayerKind::Requant:
      s.H = pick(1, 6);
      s.W = pick(1, 6);
      s.C = 32 * pick(1, 2);
      s.M = s.C;
      break;
  }
  if (kind == LayerKind::Residual) {
    d.elem_width = pick(0, 1) ? funits::WidthMode::E16 : funits::WidthMode::E32;
  } else {
    static constexpr QuantTarget targets[] = {QuantTarget::None, QuantTarget::I8, QuantTarget::T, QuantTarget::B};
    d.target = targets[pick(kind == LayerKind::Requant ? 1 : 0, 3)];
    const int g = d.groups();
    d.quant.assign(static_cast<std::size_t>(pick(0, 1) ? g : 1), {});
    const bool wide_in = d.kind == LayerKind::Requant || d.mode == MacMode::I8;
    for (auto& q : d.quant) {
      q.mult = pick(1, 1024);
      q.shift = wide_in ? pick(10, 20) : pick(0, 6);
      q.zp = pick(-20, 20);
      q.threshold = d.target == QuantTarget::T ? pick(0, 12) : pick(-12, 12);
      if (d.kind == LayerKind::Requant && d.target != QuantTarget::I8) q.threshold *= 256;
    }
  }
  d.options.loop_order = std::string("rsc");
  if (pick(0, 3) == 0) {
    std::string lo = "rsc";
    std::shuffle(lo.begin(), lo.end(), rng);
    d.options.loop_order = lo;
  }
  check_layer(d);
  return d;
}

}  // namespace braintta
