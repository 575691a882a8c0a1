#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace braintta {

inline constexpr int kScalarWidth = 32;
inline constexpr int kBoolWidth = 1;

enum class Domain : std::uint8_t { Scalar, Vector };

// 1-bit and 32-bit values travel on scalar buses, 1024-bit values on vector buses.
constexpr Domain domain_of(int width) { return width > kScalarWidth ? Domain::Vector : Domain::Scalar; }

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FuKind : std::uint8_t { Cu, Salu, Lsu, Vmac, Vadd, Vops };
enum class PortDir : std::uint8_t { In, Out, Trigger };

struct PortSpec {
  std::string name;
  PortDir dir;
  int width;  // trigger ports: 0, the operand width comes from the opcode
};

struct OpcodeSpec {
  std::string name;
  int trigger_width;
};

struct FuKindSpec {
  std::vector<PortSpec> ports;
  std::vector<OpcodeSpec> opcodes;

  const PortSpec* port(std::string_view n) const {
    for (const auto& p : ports)
      if (p.name == n) return &p;
    return nullptr;
  }
  int opcode_index(std::string_view n) const {
    for (std::size_t i = 0; i < opcodes.size(); ++i)
      if (opcodes[i].name == n) return static_cast<int>(i);
    return -1;
  }
};

inline std::string_view to_string(FuKind k) {
  switch (k) {
    case FuKind::Cu: return "cu";
    case FuKind::Salu: return "salu";
    case FuKind::Lsu: return "lsu";
    case FuKind::Vmac: return "vmac";
    case FuKind::Vadd: return "vadd";
    case FuKind::Vops: return "vops";
  }
  return "?";
}

inline FuKind parse_fu_kind(std::string_view s) {
  for (auto k : {FuKind::Cu, FuKind::Salu, FuKind::Lsu, FuKind::Vmac, FuKind::Vadd, FuKind::Vops})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown functional-unit kind '" + std::string(s) + "'");
}

namespace detail {

inline FuKindSpec make_kind_spec(FuKind k) {
  constexpr int S = kScalarWidth;
  constexpr int V = 1024;
  FuKindSpec spec;
  switch (k) {
    case FuKind::Cu:
      spec.ports = {{"iter", PortDir::In, S}, {"t", PortDir::Trigger, 0}};
      spec.opcodes = {{"jump", S}, {"cjump", S}, {"loop", S}, {"halt", S}};
      break;
    case FuKind::Salu:
      spec.ports = {{"a", PortDir::In, S}, {"t", PortDir::Trigger, 0}, {"out", PortDir::Out, S}};
      for (auto n : {"add", "sub", "and", "or", "xor", "shl", "shr_s", "shr_u", "eq", "lt_s", "lt_u", "mul"})
        spec.opcodes.push_back({n, S});
      break;
    case FuKind::Lsu:
      spec.ports = {{"t", PortDir::Trigger, 0},  {"data", PortDir::In, S}, {"vdata", PortDir::In, V},
                    {"out", PortDir::Out, S}, {"vout", PortDir::Out, V}};
      for (int k32 = 1; k32 <= 32; ++k32) spec.opcodes.push_back({"ld" + std::to_string(32 * k32), S});
      for (int k32 = 1; k32 <= 32; ++k32) spec.opcodes.push_back({"st" + std::to_string(32 * k32), S});
      break;
    case FuKind::Vmac:
      spec.ports = {{"a", PortDir::In, V}, {"t", PortDir::Trigger, 0}, {"out", PortDir::Out, V}};
      spec.opcodes = {{"macb", V}, {"mact", V}, {"mac8", V}, {"initacc", V}, {"rd32", S}, {"rd16", S}};
      break;
    case FuKind::Vadd:
      spec.ports = {{"b", PortDir::In, V}, {"t", PortDir::Trigger, 0}, {"out", PortDir::Out, V}};
      spec.opcodes = {{"add16", V}, {"add32", V}};
      break;
    case FuKind::Vops:
      spec.ports = {{"b", PortDir::In, V},   {"idx", PortDir::In, S},  {"x", PortDir::In, S},
                    {"t", PortDir::Trigger, 0}, {"out", PortDir::Out, V}, {"sout", PortDir::Out, S}};
      spec.opcodes = {{"qi8", V},   {"qb", V},    {"qt", V},    {"relu16", V}, {"relu32", V}, {"max16", V},
                      {"max32", V}, {"ins", V},   {"ext", V},   {"bcast", S}};
      break;
  }
  return spec;
}

}  // namespace detail

inline const FuKindSpec& kind_spec(FuKind k) {
  static const FuKindSpec specs[] = {
      detail::make_kind_spec(FuKind::Cu),   detail::make_kind_spec(FuKind::Salu),
      detail::make_kind_spec(FuKind::Lsu),  detail::make_kind_spec(FuKind::Vmac),
      detail::make_kind_spec(FuKind::Vadd), detail::make_kind_spec(FuKind::Vops)};
  return specs[static_cast<int>(k)];
}

struct BusSpec {
  int width = kScalarWidth;
  int imm_bits = 0;  // 0: no immediates on this bus
};

struct RfSpec {
  std::string name;
  int entries = 0;
  int width = kScalarWidth;
};

struct FuSpec {
  std::string name;
  FuKind kind = FuKind::Salu;
  int latency = 1;
  std::string memory;  // LSUs only
};

struct MemorySpec {
  std::string name;
  int banks = 32;
  int bank_bytes = 16384;
  int word_bits = 32;

  std::size_t bytes() const { return static_cast<std::size_t>(banks) * static_cast<std::size_t>(bank_bytes); }
};

struct MachineConfig {
  std::vector<BusSpec> buses;
  std::vector<RfSpec> rfs;
  std::vector<FuSpec> fus;
  std::vector<MemorySpec> memories;
  // Per bus: reachable endpoints, "fu.port" for FU ports or the RF name.
  std::vector<std::set<std::string>> connectivity;
  int clock_mhz = 300;
  int loopbuffer_entries = 64;
  // When false, hardware loops still count iterations but refetch every
  // instruction from IMEM.
  bool loopbuffer_enabled = true;
  int imem_instructions = 16384;

  int find_fu(std::string_view n) const {
    for (std::size_t i = 0; i < fus.size(); ++i)
      if (fus[i].name == n) return static_cast<int>(i);
    return -1;
  }
  int find_rf(std::string_view n) const {
    for (std::size_t i = 0; i < rfs.size(); ++i)
      if (rfs[i].name == n) return static_cast<int>(i);
    return -1;
  }
  int find_memory(std::string_view n) const {
    for (std::size_t i = 0; i < memories.size(); ++i)
      if (memories[i].name == n) return static_cast<int>(i);
    return -1;
  }
  // The boolean register file used by move guards.
  int guard_rf() const {
    for (std::size_t i = 0; i < rfs.size(); ++i)
      if (rfs[i].width == kBoolWidth) return static_cast<int>(i);
    return -1;
  }
  bool connected(std::size_t bus, const std::string& key) const {
    return bus < connectivity.size() && connectivity[bus].contains(key);
  }

  // Every endpoint whose width fits the bus domain.
  std::set<std::string> full_crossbar(std::size_t bus) const {
    std::set<std::string> keys;
    const Domain d = domain_of(buses[bus].width);
    for (const auto& rf : rfs)
      if (domain_of(rf.width) == d) keys.insert(rf.name);
    for (const auto& fu : fus) {
      for (const auto& p : kind_spec(fu.kind).ports) {
        bool fits = false;
        if (p.dir == PortDir::Trigger) {
          for (const auto& op : kind_spec(fu.kind).opcodes) fits = fits || domain_of(op.trigger_width) == d;
        } else {
          fits = domain_of(p.width) == d;
        }
        if (fits) keys.insert(fu.name + "." + p.name);
      }
    }
    return keys;
  }

  void connect_full_crossbar() {
    connectivity.assign(buses.size(), {});
    for (std::size_t b = 0; b < buses.size(); ++b) connectivity[b] = full_crossbar(b);
  }

  // Structural checks; throws ConfigError.
  void check() const {
    if (buses.empty()) throw ConfigError("machine has no buses");
    if (connectivity.size() != buses.size()) throw ConfigError("connectivity must list one entry per bus");
    for (const auto& b : buses) {
      if (b.width != kScalarWidth && b.width != 1024) throw ConfigError("bus width must be 32 or 1024");
      if (b.imm_bits < 0 || b.imm_bits > 32) throw ConfigError("immediate width must be in [0,32]");
      if (b.imm_bits > 0 && b.width != kScalarWidth) throw ConfigError("immediates are only allowed on scalar buses");
    }
    for (const auto& rf : rfs)
      if (rf.entries <= 0 || (rf.width != 1 && rf.width != 32 && rf.width != 1024))
        throw ConfigError("register file '" + rf.name + "' has invalid geometry");
    for (const auto& fu : fus) {
      if (fu.latency < 1) throw ConfigError("functional unit '" + fu.name + "' latency must be >= 1");
      if (fu.kind == FuKind::Lsu && find_memory(fu.memory) < 0)
        throw ConfigError("LSU '" + fu.name + "' references unknown memory '" + fu.memory + "'");
      if (fu.name.empty() || find_rf(fu.name) >= 0) throw ConfigError("functional unit name clashes: " + fu.name);
    }
    for (const auto& m : memories)
      if (m.banks <= 0 || m.bank_bytes <= 0 || m.bank_bytes % 4 != 0 || m.word_bits != 32)
        throw ConfigError("memory '" + m.name + "' has invalid geometry");
    for (std::size_t b = 0; b < connectivity.size(); ++b) {
      for (const auto& key : connectivity[b]) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) {
          if (find_rf(key) < 0) throw ConfigError("bus " + std::to_string(b) + " connects unknown RF '" + key + "'");
          continue;
        }
        const int fu = find_fu(key.substr(0, dot));
        if (fu < 0 || !kind_spec(fus[fu].kind).port(key.substr(dot + 1)))
          throw ConfigError("bus " + std::to_string(b) + " connects unknown port '" + key + "'");
      }
    }
    if (loopbuffer_entries < 0) throw ConfigError("loopbuffer_entries must be >= 0");
    if (clock_mhz <= 0) throw ConfigError("clock_mhz must be positive");
  }
};

// Six 32-bit scalar buses (0-5) and six 1024-bit vector buses (6-11).
inline MachineConfig default_config() {
  MachineConfig c;
  for (int i = 0; i < 6; ++i) c.buses.push_back({kScalarWidth, 32});
  for (int i = 0; i < 6; ++i) c.buses.push_back({1024, 0});
  c.rfs = {{"rf", 16, 32}, {"b", 4, 1}, {"vrf0", 8, 1024}, {"vrf1", 8, 1024}};
  c.fus = {{"cu", FuKind::Cu, 1, ""},       {"salu", FuKind::Salu, 1, ""}, {"salu2", FuKind::Salu, 1, ""},
           {"lsud", FuKind::Lsu, 1, "DMEM"}, {"lsup", FuKind::Lsu, 1, "PMEM"}, {"vmac", FuKind::Vmac, 1, ""},
           {"vadd", FuKind::Vadd, 1, ""},   {"vops", FuKind::Vops, 1, ""}};
  c.memories = {{"DMEM", 32, 16384, 32}, {"PMEM", 32, 16384, 32}};
  c.connect_full_crossbar();
  return c;
}

// ---------------------------------------------------------------- JSON

inline constexpr const char* kMachineSchema = "braintta.machine/1";

inline nlohmann::json to_json(const MachineConfig& c) {
  using nlohmann::json;
  json j;
  j["schema"] = kMachineSchema;
  j["clock_mhz"] = c.clock_mhz;
  j["loopbuffer_entries"] = c.loopbuffer_entries;
  j["loopbuffer_enabled"] = c.loopbuffer_enabled;
  j["imem_instructions"] = c.imem_instructions;
  for (const auto& b : c.buses) j["buses"].push_back({{"width", b.width}, {"imm_bits", b.imm_bits}});
  for (const auto& r : c.rfs) j["rfs"].push_back({{"name", r.name}, {"entries", r.entries}, {"width", r.width}});
  for (const auto& f : c.fus) {
    json fj = {{"name", f.name}, {"kind", std::string(to_string(f.kind))}, {"latency", f.latency}};
    if (!f.memory.empty()) fj["memory"] = f.memory;
    j["fus"].push_back(fj);
  }
  for (const auto& m : c.memories)
    j["memories"].push_back(
        {{"name", m.name}, {"banks", m.banks}, {"bank_bytes", m.bank_bytes}, {"word_bits", m.word_bits}});
  bool full = true;
  for (std::size_t b = 0; b < c.buses.size(); ++b) full = full && c.connectivity[b] == c.full_crossbar(b);
  if (full) {
    j["connectivity"] = "full";
  } else {
    for (const auto& s : c.connectivity) j["connectivity"].push_back(std::vector<std::string>(s.begin(), s.end()));
  }
  return j;
}

// Missing fields take the default-config values.
inline MachineConfig machine_from_json(const nlohmann::json& j) {
  MachineConfig c = default_config();
  try {
    if (j.contains("schema") && j.at("schema") != kMachineSchema)
      throw ConfigError("unsupported machine schema '" + j.at("schema").get<std::string>() + "'");
    c.clock_mhz = j.value("clock_mhz", c.clock_mhz);
    c.loopbuffer_entries = j.value("loopbuffer_entries", c.loopbuffer_entries);
    c.loopbuffer_enabled = j.value("loopbuffer_enabled", c.loopbuffer_enabled);
    c.imem_instructions = j.value("imem_instructions", c.imem_instructions);
    if (j.contains("buses")) {
      c.buses.clear();
      for (const auto& b : j.at("buses")) c.buses.push_back({b.at("width").get<int>(), b.value("imm_bits", 0)});
    }
    if (j.contains("rfs")) {
      c.rfs.clear();
      for (const auto& r : j.at("rfs"))
        c.rfs.push_back({r.at("name").get<std::string>(), r.at("entries").get<int>(), r.at("width").get<int>()});
    }
    if (j.contains("fus")) {
      c.fus.clear();
      for (const auto& f : j.at("fus"))
        c.fus.push_back({f.at("name").get<std::string>(), parse_fu_kind(f.at("kind").get<std::string>()),
                         f.value("latency", 1), f.value("memory", std::string{})});
    }
    if (j.contains("memories")) {
      c.memories.clear();
      for (const auto& m : j.at("memories"))
        c.memories.push_back({m.at("name").get<std::string>(), m.value("banks", 32), m.value("bank_bytes", 16384),
                              m.value("word_bits", 32)});
    }
    const auto conn = j.value("connectivity", nlohmann::json("full"));
    if (conn.is_string()) {
      if (conn != "full") throw ConfigError("connectivity must be \"full\" or a per-bus list");
      c.connect_full_crossbar();
    } else {
      c.connectivity.clear();
      for (const auto& bus : conn) c.connectivity.emplace_back(bus.begin(), bus.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed machine config: ") + e.what());
  }
  c.check();
  return c;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

inline MachineConfig load_machine(const std::string& path) { return machine_from_json(read_json_file(path)); }

}  // namespace braintta
