#pragma once

// Event-based energy accounting. Every event from a run is priced from a cost
// table (femtojoules) and attributed to one component.

#include <array>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "braintta/config.hpp"
#include "braintta/events.hpp"
#include "braintta/layer.hpp"

namespace braintta {

struct CostTableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CostTable {
  double imem_fetch_per_bit = 0;
  double loopbuf_replay = 0;
  double move_scalar = 0;
  double move_vector = 0;
  // "kind.opcode" or "kind.*"
  std::map<std::string, double> fu_op;
  std::array<double, 3> rf_read{};   // indexed by RfWidthClass
  std::array<double, 3> rf_write{};
  double sram_read = 0;   // per bank word
  double sram_write = 0;
  double idle_cycle = 0;

  double fu_cost(FuKind k, const std::string& opcode) const {
    const std::string kind(to_string(k));
    if (auto it = fu_op.find(kind + "." + opcode); it != fu_op.end()) return it->second;
    if (auto it = fu_op.find(kind + ".*"); it != fu_op.end()) return it->second;
    throw CostTableError("cost table has no entry for '" + kind + "." + opcode + "'");
  }
};

// Calibrated for the default 12-bus machine at 300 MHz.
inline CostTable default_cost_table() {
  CostTable t;
  t.imem_fetch_per_bit = 9.0;
  t.loopbuf_replay = 420.0;
  t.move_scalar = 120.0;
  t.move_vector = 2600.0;
  t.fu_op = {{"vmac.macb", 48000.0}, {"vmac.mact", 48000.0}, {"vmac.mac8", 70000.0}, {"vmac.*", 4000.0},
             {"lsu.*", 350.0},       {"salu.*", 450.0},      {"vops.*", 3000.0},     {"vadd.*", 2500.0},
             {"cu.*", 300.0}};
  t.rf_read = {20.0, 150.0, 3200.0};
  t.rf_write = {25.0, 180.0, 3600.0};
  t.sram_read = 310.0;
  t.sram_write = 360.0;
  t.idle_cycle = 0.0;
  return t;
}

inline constexpr const char* kCostTableSchema = "braintta.cost_table/1";

namespace detail {

inline double cost_value(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw CostTableError("cost '" + where + "' must be a number");
  const double v = j.get<double>();
  if (v < 0) throw CostTableError("cost '" + where + "' is negative");
  return v;
}

inline void width_costs(const nlohmann::json& j, std::array<double, 3>& out, const std::string& where) {
  if (!j.is_object()) throw CostTableError("'" + where + "' must be an object");
  static const char* names[] = {"bool", "scalar", "vector"};
  for (const auto& [k, v] : j.items()) {
    int idx = -1;
    for (int i = 0; i < 3; ++i)
      if (k == names[i]) idx = i;
    if (idx < 0) throw CostTableError("unknown key '" + where + "." + k + "' in cost table");
    out[static_cast<std::size_t>(idx)] = cost_value(v, where + "." + k);
  }
}

}  // namespace detail

inline nlohmann::json to_json(const CostTable& t) {
  nlohmann::json j;
  j["schema"] = kCostTableSchema;
  j["units"] = "fJ";
  j["imem_fetch_per_bit"] = t.imem_fetch_per_bit;
  j["loopbuf_replay"] = t.loopbuf_replay;
  j["move"] = {{"scalar", t.move_scalar}, {"vector", t.move_vector}};
  j["fu_op"] = t.fu_op;
  j["rf"]["read"] = {{"bool", t.rf_read[0]}, {"scalar", t.rf_read[1]}, {"vector", t.rf_read[2]}};
  j["rf"]["write"] = {{"bool", t.rf_write[0]}, {"scalar", t.rf_write[1]}, {"vector", t.rf_write[2]}};
  j["sram"] = {{"read", t.sram_read}, {"write", t.sram_write}};
  j["idle_cycle"] = t.idle_cycle;
  return j;
}

// Keys that are absent keep the default; unknown keys are errors.
inline CostTable cost_table_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw CostTableError("cost table must be a JSON object");
  CostTable t = default_cost_table();
  for (const auto& [k, v] : j.items()) {
    if (k == "schema") {
      if (v != kCostTableSchema) throw CostTableError("unsupported cost table schema " + v.dump());
    } else if (k == "units") {
      if (v != "fJ") throw CostTableError("cost table units must be \"fJ\"");
    } else if (k == "imem_fetch_per_bit") {
      t.imem_fetch_per_bit = detail::cost_value(v, k);
    } else if (k == "loopbuf_replay") {
      t.loopbuf_replay = detail::cost_value(v, k);
    } else if (k == "idle_cycle") {
      t.idle_cycle = detail::cost_value(v, k);
    } else if (k == "move") {
      std::array<double, 3> tmp{0, t.move_scalar, t.move_vector};
      detail::width_costs(v, tmp, k);
      if (v.contains("bool")) throw CostTableError("unknown key 'move.bool' in cost table");
      t.move_scalar = tmp[1];
      t.move_vector = tmp[2];
    } else if (k == "fu_op") {
      if (!v.is_object()) throw CostTableError("'fu_op' must be an object");
      for (const auto& [op, c] : v.items()) {
        const auto dot = op.find('.');
        if (dot == std::string::npos) throw CostTableError("fu_op key '" + op + "' must be kind.opcode or kind.*");
        FuKind kind;
        try {
          kind = parse_fu_kind(op.substr(0, dot));
        } catch (const ConfigError&) {
          throw CostTableError("unknown key 'fu_op." + op + "' in cost table");
        }
        const auto opcode = op.substr(dot + 1);
        if (opcode != "*" && kind_spec(kind).opcode_index(opcode) < 0)
          throw CostTableError("unknown key 'fu_op." + op + "' in cost table");
        t.fu_op[op] = detail::cost_value(c, "fu_op." + op);
      }
    } else if (k == "rf") {
      if (!v.is_object()) throw CostTableError("'rf' must be an object");
      for (const auto& [rw, c] : v.items()) {
        if (rw == "read") detail::width_costs(c, t.rf_read, "rf.read");
        else if (rw == "write") detail::width_costs(c, t.rf_write, "rf.write");
        else throw CostTableError("unknown key 'rf." + rw + "' in cost table");
      }
    } else if (k == "sram") {
      if (!v.is_object()) throw CostTableError("'sram' must be an object");
      for (const auto& [rw, c] : v.items()) {
        if (rw == "read") t.sram_read = detail::cost_value(c, "sram.read");
        else if (rw == "write") t.sram_write = detail::cost_value(c, "sram.write");
        else throw CostTableError("unknown key 'sram." + rw + "' in cost table");
      }
    } else {
      throw CostTableError("unknown key '" + k + "' in cost table");
    }
  }
  return t;
}

inline CostTable load_cost_table(const std::string& path) {
  try {
    return cost_table_from_json(read_json_file(path));
  } catch (const ConfigError& e) {
    throw CostTableError(e.what());
  }
}

// ---------------------------------------------------------------- report

enum class Component : std::uint8_t { Vmac, Interconnect, Imem, Dmem, Pmem, Rf, OtherLogic, Idle };
inline constexpr int kComponents = 8;
inline constexpr const char* kComponentNames[kComponents] = {"vMAC", "interconnect", "IMEM",        "DMEM",
                                                              "PMEM", "RF",           "other-logic", "idle"};

struct EnergyReport {
  std::array<double, kComponents> component_fj{};
  std::uint64_t op_count = 0;
  std::uint64_t cycles = 0;
  double clock_mhz = 300;

  double total_fj() const {
    double s = 0;
    for (double c : component_fj) s += c;
    return s;
  }
  double fj(Component c) const { return component_fj[static_cast<std::size_t>(c)]; }
  double fj_per_op() const { return op_count ? total_fj() / static_cast<double>(op_count) : 0.0; }
  double achieved_gops() const {
    return cycles ? static_cast<double>(op_count) / static_cast<double>(cycles) * clock_mhz / 1000.0 : 0.0;
  }

  EnergyReport& operator+=(const EnergyReport& o) {
    for (int i = 0; i < kComponents; ++i) component_fj[i] += o.component_fj[i];
    op_count += o.op_count;
    cycles += o.cycles;
    return *this;
  }
};

// Cycles are counted from fetch and replay events, one per cycle.
inline EnergyReport account(const EventLog& log, const CostTable& t, std::uint64_t op_count, double clock_mhz = 300) {
  EnergyReport r;
  r.op_count = op_count;
  r.clock_mhz = clock_mhz;

  std::vector<Component> mem_comp;
  for (const auto& name : log.memories) {
    if (name == "DMEM") mem_comp.push_back(Component::Dmem);
    else if (name == "PMEM") mem_comp.push_back(Component::Pmem);
    else throw CostTableError("no energy component for memory '" + name + "'");
  }
  // price per (kind, opcode), resolved once
  std::array<std::vector<double>, 6> fu_price;
  for (int k = 0; k < 6; ++k) {
    const auto kind = static_cast<FuKind>(k);
    for (const auto& op : kind_spec(kind).opcodes) fu_price[static_cast<std::size_t>(k)].push_back(t.fu_cost(kind, op.name));
  }

  auto add = [&](Component c, double v) { r.component_fj[static_cast<std::size_t>(c)] += v; };
  for (const auto& e : log.events) {
    switch (e.kind) {
      case EventKind::ImemFetch:
        add(Component::Imem, t.imem_fetch_per_bit * e.value);
        ++r.cycles;
        break;
      case EventKind::LoopbufReplay:
        add(Component::Imem, t.loopbuf_replay);
        ++r.cycles;
        break;
      case EventKind::Move: add(Component::Interconnect, e.flag ? t.move_vector : t.move_scalar); break;
      case EventKind::FuOp: {
        if (e.unit >= 6) throw CostTableError("event for unknown unit kind");
        const auto& prices = fu_price[e.unit];
        if (e.sub >= prices.size()) throw CostTableError("event for unknown opcode");
        add(static_cast<FuKind>(e.unit) == FuKind::Vmac ? Component::Vmac : Component::OtherLogic, prices[e.sub]);
        break;
      }
      case EventKind::RfAccess:
        if (e.sub >= 3) throw CostTableError("event for unknown register width class");
        add(Component::Rf, e.flag ? t.rf_write[e.sub] : t.rf_read[e.sub]);
        break;
      case EventKind::SramBank:
        if (e.unit >= mem_comp.size()) throw CostTableError("event for unknown memory");
        add(mem_comp[e.unit], e.flag ? t.sram_write : t.sram_read);
        break;
      case EventKind::IdleCycle: add(Component::Idle, t.idle_cycle); break;
    }
  }
  return r;
}

inline std::string format_report(const EnergyReport& r) {
  std::ostringstream os;
  char buf[128];
  const double total = r.total_fj();
  for (int i = 0; i < kComponents; ++i) {
    std::snprintf(buf, sizeof buf, "%-13s %16.1f fJ  %5.1f%%\n", kComponentNames[i], r.component_fj[i],
                  total > 0 ? 100.0 * r.component_fj[i] / total : 0.0);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-13s %16.1f fJ\n", "total", total);
  os << buf;
  std::snprintf(buf, sizeof buf, "ops %llu  cycles %llu  fJ/op %.3f  GOPS %.2f\n",
                static_cast<unsigned long long>(r.op_count), static_cast<unsigned long long>(r.cycles), r.fj_per_op(),
                r.achieved_gops());
  os << buf;
  return os.str();
}

inline nlohmann::json to_json(const EnergyReport& r) {
  nlohmann::json j;
  for (int i = 0; i < kComponents; ++i) j["components_fJ"][kComponentNames[i]] = r.component_fj[i];
  j["total_fJ"] = r.total_fj();
  j["op_count"] = r.op_count;
  j["cycles"] = r.cycles;
  j["fJ_per_op"] = r.fj_per_op();
  j["achieved_GOPS"] = r.achieved_gops();
  return j;
}

// ---------------------------------------------------------------- op counts

// One multiply-accumulate counts as two operations; elementwise layers count zero.
inline std::uint64_t ops_of_layer(const LayerDesc& d) {
  const auto& s = d.shape;
  const auto pix = static_cast<std::uint64_t>(s.OH()) * static_cast<std::uint64_t>(s.OW());
  const auto win = static_cast<std::uint64_t>(s.R) * static_cast<std::uint64_t>(s.S);
  switch (d.kind) {
    case LayerKind::Conv:
    case LayerKind::Fc:
      return 2ull * static_cast<std::uint64_t>(s.M) * static_cast<std::uint64_t>(s.C) * win * pix;
    case LayerKind::DwConv: return 2ull * static_cast<std::uint64_t>(s.C) * win * pix;
    case LayerKind::Residual:
    case LayerKind::Requant: return 0;
  }
  return 0;
}

// 32 lanes, each a full word of MACs per cycle.
inline double peak_gops(MacMode mode, const MachineConfig& m) {
  return static_cast<double>(kLanes) * elements_per_word(mode) * 2.0 * m.clock_mhz / 1000.0;
}

}  // namespace braintta
