#pragma once

// Cycle-accurate model of the transport-triggered core.
//
// One cycle: fetch (or loopbuffer replay), evaluate guards, read every source
// from the pre-cycle state, write destinations (operand ports latch), fire
// triggers in slot order, retire FU results whose latency has elapsed, then
// advance the pc. A result triggered in cycle c with latency L is readable
// from cycle c + L on.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "braintta/config.hpp"
#include "braintta/events.hpp"
#include "braintta/funits.hpp"
#include "braintta/isa.hpp"
#include "braintta/memory.hpp"
#include "braintta/validate.hpp"

namespace braintta {

struct CoreFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class HaltReason : std::uint8_t { None, Halted, MaxCycles, Error };

inline std::string_view to_string(HaltReason r) {
  switch (r) {
    case HaltReason::None: return "running";
    case HaltReason::Halted: return "halted";
    case HaltReason::MaxCycles: return "max_cycles";
    case HaltReason::Error: return "error";
  }
  return "?";
}

struct FuState {
  std::vector<Word> s_in;
  std::vector<Vec1024> v_in;
  Word s_out = 0;
  Vec1024 v_out;
  AccVector acc;  // vMAC only

  struct Pending {
    std::uint64_t ready = 0;  // first cycle the result is visible
    bool has_s = false;
    bool has_v = false;
    Word s = 0;
    Vec1024 v;
  };
  std::vector<Pending> pending;
};

struct LoopState {
  int start = 0;
  int body_len = 0;
  int remaining = 0;  // iterations left including the current one
  bool first_pass = true;
  friend bool operator==(const LoopState&, const LoopState&) = default;
};

struct CoreState {
  int pc = 0;
  std::uint64_t cycle = 0;
  bool halted = false;
  HaltReason reason = HaltReason::None;
  std::string error;
  std::vector<std::vector<Word>> rf_scalar;     // indexed like MachineConfig::rfs; empty for vector RFs
  std::vector<std::vector<Vec1024>> rf_vector;  // empty for scalar RFs
  std::vector<FuState> fus;
  std::vector<BankedMemory> memories;
  std::optional<LoopState> loop;

  Word reg(const MachineConfig& m, std::string_view rf, int i) const { return rf_scalar.at(m.find_rf(rf)).at(i); }
  const Vec1024& vreg(const MachineConfig& m, std::string_view rf, int i) const {
    return rf_vector.at(m.find_rf(rf)).at(i);
  }
  BankedMemory& memory(const MachineConfig& m, std::string_view name) { return memories.at(m.find_memory(name)); }
  const BankedMemory& memory(const MachineConfig& m, std::string_view name) const {
    return memories.at(m.find_memory(name));
  }
};

// Fresh state with memories sized per config and the program's data directives applied.
inline CoreState make_state(const MachineConfig& m, const Program* p = nullptr) {
  CoreState s;
  for (const auto& rf : m.rfs) {
    if (domain_of(rf.width) == Domain::Vector) {
      s.rf_scalar.emplace_back();
      s.rf_vector.emplace_back(rf.entries);
    } else {
      s.rf_scalar.emplace_back(rf.entries, 0);
      s.rf_vector.emplace_back();
    }
  }
  for (const auto& fu : m.fus) {
    FuState f;
    int ns = 0, nv = 0;
    for (const auto& port : kind_spec(fu.kind).ports) {
      if (port.dir != PortDir::In) continue;
      (domain_of(port.width) == Domain::Vector ? nv : ns)++;
    }
    f.s_in.assign(ns, 0);
    f.v_in.assign(nv, {});
    s.fus.push_back(std::move(f));
  }
  for (const auto& mem : m.memories) s.memories.emplace_back(mem);
  if (p) {
    for (const auto& d : p->data) {
      const int mi = m.find_memory(d.memory);
      if (mi < 0) throw ConfigError("data directive targets unknown memory '" + d.memory + "'");
      for (std::size_t i = 0; i < d.words.size(); ++i)
        s.memories[mi].write_word(d.address + 4 * static_cast<std::uint32_t>(i), d.words[i]);
    }
  }
  return s;
}

struct RunResult {
  std::uint64_t cycles = 0;
  HaltReason halt_reason = HaltReason::None;
  std::string error;
  std::vector<std::string> trace;
  EventLog event_log;
  std::uint64_t mac_triggers = 0;  // vMAC macb/mact/mac8 triggers
  std::uint64_t fetches = 0;
  std::uint64_t replays = 0;

  double mac_utilization() const { return cycles ? static_cast<double>(mac_triggers) / static_cast<double>(cycles) : 0.0; }
};

// A program resolved against a machine configuration for fast stepping.
class Core {
 public:
  Core(const MachineConfig& m, const Program& p) : cfg_(m), instr_bits_(encode_width(m)) { compile(p); }

  const MachineConfig& config() const { return cfg_; }
  int instruction_bits() const { return instr_bits_; }

  // Advances one cycle. Faults halt the state with HaltReason::Error.
  void step(CoreState& s, RunResult* out = nullptr, bool trace = false) const {
    if (s.halted) throw CoreFault("step on a halted core");
    EventLog* log = out ? &out->event_log : nullptr;
    try {
      step_impl(s, out, log, trace);
    } catch (const CoreFault& e) {
      fault(s, e.what());
    } catch (const MemoryFault& e) {
      fault(s, e.what());
    } catch (const funits::UnitFault& e) {
      fault(s, e.what());
    }
    ++s.cycle;
    if (out) out->cycles += 1;
  }

  RunResult run(CoreState& s, std::uint64_t max_cycles, bool trace = false) const {
    if (max_cycles == 0) throw std::invalid_argument("max_cycles must be positive");
    RunResult r;
    for (const auto& mem : cfg_.memories) r.event_log.memories.push_back(mem.name);
    while (!s.halted && r.cycles < max_cycles) step(s, &r, trace);
    if (s.halted) {
      r.halt_reason = s.reason;
      r.error = s.error;
    } else {
      r.halt_reason = HaltReason::MaxCycles;
    }
    return r;
  }

 private:
  enum class SrcKind : std::uint8_t { Imm, Reg, Port };
  enum class DstKind : std::uint8_t { Reg, Operand, Trigger };

  struct CMove {
    bool vector_bus = false;
    int guard = -1;
    bool polarity = true;
    SrcKind sk = SrcKind::Imm;
    Word imm = 0;
    int src_unit = 0;  // rf or fu index
    int src_idx = 0;   // register index, or 0 scalar out / 1 vector out
    DstKind dk = DstKind::Reg;
    int dst_unit = 0;
    int dst_idx = 0;  // register index or operand slot
    int opcode = 0;
  };

  struct CInstr {
    std::vector<CMove> moves;
    std::vector<std::string> text;  // per slot, for tracing
  };

  struct Value {
    Word s = 0;
    Vec1024 v;
  };

  void compile(const Program& p) {
    const auto diags = validate(p, cfg_);
    if (!diags.empty()) throw ConfigError("program does not validate: " + format_diagnostic(diags.front()));
    for (const auto& ins : p.instructions) {
      CInstr ci;
      for (std::size_t slot = 0; slot < ins.slots.size(); ++slot) {
        if (!ins.slots[slot]) {
          ci.text.emplace_back("-");
          continue;
        }
        const Move& mv = *ins.slots[slot];
        ci.text.push_back(to_text(mv));
        CMove c;
        c.vector_bus = domain_of(cfg_.buses[slot].width) == Domain::Vector;
        if (mv.guard) {
          c.guard = mv.guard->index;
          c.polarity = mv.guard->polarity;
        }
        if (const auto* imm = std::get_if<Immediate>(&mv.src)) {
          c.sk = SrcKind::Imm;
          c.imm = static_cast<Word>(imm->value);
        } else if (const auto* r = std::get_if<RegRef>(&mv.src)) {
          c.sk = SrcKind::Reg;
          c.src_unit = cfg_.find_rf(r->rf);
          c.src_idx = r->index;
        } else {
          const auto& port = std::get<PortId>(mv.src);
          c.sk = SrcKind::Port;
          c.src_unit = cfg_.find_fu(port.fu);
          const auto* ps = kind_spec(cfg_.fus[c.src_unit].kind).port(port.port);
          c.src_idx = domain_of(ps->width) == Domain::Vector ? 1 : 0;
        }
        if (const auto* r = std::get_if<RegRef>(&mv.dst)) {
          c.dk = DstKind::Reg;
          c.dst_unit = cfg_.find_rf(r->rf);
          c.dst_idx = r->index;
        } else if (const auto* port = std::get_if<PortId>(&mv.dst)) {
          c.dk = DstKind::Operand;
          c.dst_unit = cfg_.find_fu(port->fu);
          c.dst_idx = operand_slot(cfg_.fus[c.dst_unit].kind, port->port);
        } else {
          const auto& t = std::get<TriggerRef>(mv.dst);
          c.dk = DstKind::Trigger;
          c.dst_unit = cfg_.find_fu(t.port.fu);
          c.opcode = kind_spec(cfg_.fus[c.dst_unit].kind).opcode_index(t.opcode);
        }
        ci.moves.push_back(c);
      }
      prog_.push_back(std::move(ci));
    }
  }

  // Index among the FU's scalar (or vector) input ports, in declaration order.
  static int operand_slot(FuKind k, std::string_view name) {
    const auto& ks = kind_spec(k);
    const PortSpec* target = ks.port(name);
    int idx = 0;
    for (const auto& p : ks.ports) {
      if (p.dir != PortDir::In || domain_of(p.width) != domain_of(target->width)) continue;
      if (p.name == name) return idx;
      ++idx;
    }
    return -1;
  }

  static void fault(CoreState& s, const std::string& why) {
    s.halted = true;
    s.reason = HaltReason::Error;
    s.error = "cycle " + std::to_string(s.cycle) + ", pc " + std::to_string(s.pc) + ": " + why;
  }

  static void emit(EventLog* log, EventKind k, std::uint64_t cycle, std::uint8_t flag = 0, std::uint16_t unit = 0,
                   std::uint16_t sub = 0, std::uint32_t value = 0) {
    if (log) log->events.push_back({k, flag, unit, sub, value, cycle});
  }

  void step_impl(CoreState& s, RunResult* out, EventLog* log, bool trace) const {
    if (s.pc < 0 || s.pc >= static_cast<int>(prog_.size())) throw CoreFault("pc outside program");
    const CInstr& ins = prog_[static_cast<std::size_t>(s.pc)];
    const std::uint64_t cyc = s.cycle;

    const bool replay = s.loop && !s.loop->first_pass && cfg_.loopbuffer_enabled;
    if (replay) {
      emit(log, EventKind::LoopbufReplay, cyc);
      if (out) ++out->replays;
    } else {
      emit(log, EventKind::ImemFetch, cyc, 0, 0, 0, static_cast<std::uint32_t>(instr_bits_));
      if (out) ++out->fetches;
    }

    // guards and source reads observe the pre-cycle state
    const int grf = cfg_.guard_rf();
    std::vector<std::pair<const CMove*, Value>> live;
    live.reserve(ins.moves.size());
    for (const auto& m : ins.moves) {
      if (m.guard >= 0 && ((s.rf_scalar[grf][m.guard] & 1u) != 0) != m.polarity) continue;
      Value v;
      switch (m.sk) {
        case SrcKind::Imm: v.s = m.imm; break;
        case SrcKind::Reg: {
          const int w = cfg_.rfs[m.src_unit].width;
          if (domain_of(w) == Domain::Vector) v.v = s.rf_vector[m.src_unit][m.src_idx];
          else v.s = s.rf_scalar[m.src_unit][m.src_idx];
          emit(log, EventKind::RfAccess, cyc, 0, static_cast<std::uint16_t>(m.src_unit),
               static_cast<std::uint16_t>(rf_width_class(w)));
          break;
        }
        case SrcKind::Port:
          if (m.src_idx) v.v = s.fus[m.src_unit].v_out;
          else v.s = s.fus[m.src_unit].s_out;
          break;
      }
      emit(log, EventKind::Move, cyc, m.vector_bus ? 1 : 0);
      live.emplace_back(&m, v);
    }
    if (live.empty()) emit(log, EventKind::IdleCycle, cyc);

    std::vector<std::pair<const CMove*, const Value*>> triggers;
    for (const auto& [m, v] : live) {
      switch (m->dk) {
        case DstKind::Reg: {
          const int w = cfg_.rfs[m->dst_unit].width;
          if (domain_of(w) == Domain::Vector) s.rf_vector[m->dst_unit][m->dst_idx] = v.v;
          else s.rf_scalar[m->dst_unit][m->dst_idx] = w == kBoolWidth ? (v.s & 1u) : v.s;
          emit(log, EventKind::RfAccess, cyc, 1, static_cast<std::uint16_t>(m->dst_unit),
               static_cast<std::uint16_t>(rf_width_class(w)));
          break;
        }
        case DstKind::Operand:
          if (m->vector_bus) s.fus[m->dst_unit].v_in[m->dst_idx] = v.v;
          else s.fus[m->dst_unit].s_in[m->dst_idx] = v.s;
          break;
        case DstKind::Trigger: triggers.emplace_back(m, &v); break;
      }
    }

    std::optional<int> jump;
    bool halt = false;
    for (const auto& [m, v] : triggers) {
      const auto& fu = cfg_.fus[m->dst_unit];
      emit(log, EventKind::FuOp, cyc, 0, static_cast<std::uint16_t>(fu.kind), static_cast<std::uint16_t>(m->opcode));
      execute(s, m->dst_unit, m->opcode, *v, cyc, log, out, jump, halt);
    }

    for (auto& f : s.fus) {
      if (f.pending.empty()) continue;
      std::erase_if(f.pending, [&](const FuState::Pending& p) {
        if (p.ready > cyc + 1) return false;
        if (p.has_s) f.s_out = p.s;
        if (p.has_v) f.v_out = p.v;
        return true;
      });
    }

    if (trace && out) {
      std::string line = std::to_string(cyc) + " " + std::to_string(s.pc) + " :";
      for (std::size_t i = 0; i < ins.text.size(); ++i) line += (i ? " | " : " ") + ins.text[i];
      out->trace.push_back(std::move(line));
    }

    if (halt) {
      s.halted = true;
      s.reason = HaltReason::Halted;
    }
    if (jump) {
      if (s.loop) throw CoreFault("control transfer inside an active hardware loop");
      s.pc = *jump;
      return;
    }
    if (s.loop && s.pc == s.loop->start + s.loop->body_len - 1) {
      if (s.loop->remaining > 1) {
        --s.loop->remaining;
        s.loop->first_pass = false;
        s.pc = s.loop->start;
        return;
      }
      s.loop.reset();
    }
    ++s.pc;
  }

  void execute(CoreState& s, int fu_idx, int opcode, const Value& trig, std::uint64_t cyc, EventLog* log,
               RunResult* out, std::optional<int>& jump, bool& halt) const {
    const auto& spec = cfg_.fus[fu_idx];
    FuState& f = s.fus[fu_idx];
    const auto& op = kind_spec(spec.kind).opcodes[opcode].name;
    FuState::Pending res;
    res.ready = cyc + static_cast<std::uint64_t>(spec.latency);

    switch (spec.kind) {
      case FuKind::Cu:
        if (op == "jump" || op == "cjump") {
          jump = static_cast<int>(trig.s);
        } else if (op == "halt") {
          halt = true;
        } else {  // loop
          if (s.loop) throw CoreFault("nested loop_setup");
          const auto body = static_cast<std::int32_t>(trig.s);
          const auto iters = static_cast<std::int32_t>(f.s_in[0]);
          if (body < 1 || body > cfg_.loopbuffer_entries)
            throw CoreFault("loop body length " + std::to_string(body) + " exceeds loopbuffer");
          if (iters < 1) throw CoreFault("loop iteration count must be >= 1");
          if (s.pc + body >= static_cast<int>(prog_.size())) throw CoreFault("loop body runs past program end");
          s.loop = LoopState{s.pc + 1, body, iters, true};
        }
        return;
      case FuKind::Salu:
        res.has_s = true;
        res.s = funits::salu(static_cast<funits::AluOp>(opcode), f.s_in[0], trig.s);
        break;
      case FuKind::Lsu: {
        const bool load = opcode < 32;
        const int nwords = load ? opcode + 1 : opcode - 31;
        const int mi = cfg_.find_memory(spec.memory);
        auto& mem = s.memories[mi];
        const std::uint32_t addr = trig.s;
        if (load) {
          res.v = mem.load(addr, nwords);
          res.has_v = res.has_s = true;
          res.s = res.v.lane[0];
        } else {
          Vec1024 data = f.v_in[0];
          if (nwords == 1) data.lane[0] = f.s_in[0];
          mem.store(addr, nwords, data);
        }
        for (int i = 0; i < nwords; ++i)
          emit(log, EventKind::SramBank, cyc, load ? 0 : 1, static_cast<std::uint16_t>(mi),
               static_cast<std::uint16_t>(mem.bank_of(addr + 4u * static_cast<std::uint32_t>(i))));
        if (!load) return;
        break;
      }
      case FuKind::Vmac:
        if (op == "macb" || op == "mact" || op == "mac8") {
          const MacMode mode = op == "macb" ? MacMode::B : op == "mact" ? MacMode::T : MacMode::I8;
          f.acc = funits::vmac_trigger(mode, f.v_in[0], trig.v, f.acc);
          if (out) ++out->mac_triggers;
          return;
        }
        if (op == "initacc") {
          f.acc = funits::vmac_init(trig.v);
          return;
        }
        res.has_v = true;
        res.v = op == "rd32" ? funits::vmac_read32(f.acc) : funits::vmac_read16(f.acc);
        break;
      case FuKind::Vadd:
        res.has_v = true;
        res.v = funits::vadd(op == "add16" ? funits::WidthMode::E16 : funits::WidthMode::E32, trig.v, f.v_in[0]);
        break;
      case FuKind::Vops: {
        using funits::WidthMode;
        const Vec1024& b = f.v_in[0];
        res.has_v = res.has_s = true;
        if (op == "qi8") {
          const auto shift = static_cast<std::int32_t>(b.lane[1]);
          if (shift < 0 || shift > 31) throw CoreFault("requant shift out of range");
          res.v = funits::requant_i8(trig.v, b.signed_lane(0), shift, static_cast<std::int8_t>(b.lane[2] & 0xffu));
        } else if (op == "qb") {
          res.v.lane[0] = funits::requant_bin(trig.v, static_cast<std::int16_t>(b.lane[0] & 0xffffu));
        } else if (op == "qt") {
          res.v = funits::requant_tern(trig.v, static_cast<std::int16_t>(b.lane[0] & 0xffffu));
        } else if (op == "relu16" || op == "relu32") {
          res.v = funits::relu(op == "relu16" ? WidthMode::E16 : WidthMode::E32, trig.v);
        } else if (op == "max16" || op == "max32") {
          res.v = funits::vmax(op == "max16" ? WidthMode::E16 : WidthMode::E32, trig.v, b);
        } else if (op == "ins") {
          res.v = funits::insert(trig.v, static_cast<std::int32_t>(f.s_in[0]), f.s_in[1]);
        } else if (op == "ext") {
          res.v.lane[0] = funits::extract(trig.v, static_cast<std::int32_t>(f.s_in[0]));
        } else {  // bcast
          res.v = funits::bcast(trig.s);
        }
        res.s = res.v.lane[0];
        break;
      }
    }
    f.pending.push_back(res);
  }

  MachineConfig cfg_;
  int instr_bits_;
  std::vector<CInstr> prog_;
};

// Pure single-cycle step.
inline CoreState step(CoreState state, const Program& p, const MachineConfig& m) {
  Core(m, p).step(state);
  return state;
}

inline RunResult run(CoreState& state, const Program& p, const MachineConfig& m, std::uint64_t max_cycles,
                     bool trace = false) {
  return Core(m, p).run(state, max_cycles, trace);
}

}  // namespace braintta
