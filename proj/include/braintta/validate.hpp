#pragma once

#include <bit>
#include <set>
#include <string>
#include <vector>

#include "braintta/config.hpp"
#include "braintta/isa.hpp"

namespace braintta {

namespace detail {

inline int ceil_log2(long long n) {
  if (n <= 1) return 0;
  return static_cast<int>(std::bit_width(static_cast<unsigned long long>(n - 1)));
}

struct EndpointInfo {
  std::string key;  // connectivity key
  int width = 0;    // 0 when unresolvable
  std::string error;
};

inline EndpointInfo source_info(const Source& s, const MachineConfig& m) {
  if (std::holds_alternative<Immediate>(s)) return {"", kScalarWidth, ""};
  if (const auto* r = std::get_if<RegRef>(&s)) {
    const int rf = m.find_rf(r->rf);
    if (rf < 0) return {"", 0, "unknown register file '" + r->rf + "'"};
    if (r->index < 0 || r->index >= m.rfs[rf].entries)
      return {"", 0, "register index " + std::to_string(r->index) + " out of range for '" + r->rf + "'"};
    return {r->rf, m.rfs[rf].width, ""};
  }
  const auto& p = std::get<PortId>(s);
  const int fu = m.find_fu(p.fu);
  const PortSpec* ps = fu >= 0 ? kind_spec(m.fus[fu].kind).port(p.port) : nullptr;
  if (!ps || ps->dir != PortDir::Out) return {"", 0, "unknown port '" + p.fu + "." + p.port + "'"};
  return {p.fu + "." + p.port, ps->width, ""};
}

inline EndpointInfo dest_info(const Destination& d, const MachineConfig& m) {
  if (const auto* r = std::get_if<RegRef>(&d)) {
    const int rf = m.find_rf(r->rf);
    if (rf < 0) return {"", 0, "unknown register file '" + r->rf + "'"};
    if (r->index < 0 || r->index >= m.rfs[rf].entries)
      return {"", 0, "register index " + std::to_string(r->index) + " out of range for '" + r->rf + "'"};
    return {r->rf, m.rfs[rf].width, ""};
  }
  if (const auto* p = std::get_if<PortId>(&d)) {
    const int fu = m.find_fu(p->fu);
    const PortSpec* ps = fu >= 0 ? kind_spec(m.fus[fu].kind).port(p->port) : nullptr;
    if (!ps || ps->dir != PortDir::In) return {"", 0, "unknown port '" + p->fu + "." + p->port + "'"};
    return {p->fu + "." + p->port, ps->width, ""};
  }
  const auto& t = std::get<TriggerRef>(d);
  const int fu = m.find_fu(t.port.fu);
  if (fu < 0) return {"", 0, "unknown port '" + t.port.fu + ".t'"};
  const auto& ks = kind_spec(m.fus[fu].kind);
  const int op = ks.opcode_index(t.opcode);
  if (op < 0) return {"", 0, "unknown opcode '" + t.opcode + "' for unit '" + t.port.fu + "'"};
  return {t.port.fu + ".t", ks.opcodes[op].trigger_width, ""};
}

// Key identifying a written storage location, for conflict detection.
inline std::string write_key(const Destination& d) {
  if (const auto* r = std::get_if<RegRef>(&d)) return r->rf + "." + std::to_string(r->index);
  if (const auto* p = std::get_if<PortId>(&d)) return p->fu + "." + p->port;
  return std::get<TriggerRef>(d).port.fu + ".t";
}

inline bool imm_fits(std::int64_t v, int bits) {
  if (bits >= 32) return true;
  const std::int64_t lo = -(std::int64_t{1} << (bits - 1));
  const std::int64_t hi = (std::int64_t{1} << bits) - 1;
  return v >= lo && v <= hi;
}

}  // namespace detail

// Empty result iff the program is well formed for the machine.
inline std::vector<Diagnostic> validate(const Program& p, const MachineConfig& m) {
  std::vector<Diagnostic> out;
  auto diag = [&](int instr, int slot, std::string msg) {
    out.push_back({instr >= 0 ? p.line_of(static_cast<std::size_t>(instr)) : 0, 1, instr, slot, std::move(msg)});
  };
  const int guard_rf = m.guard_rf();
  const auto n_instr = static_cast<long long>(p.instructions.size());

  if (n_instr > m.imem_instructions)
    diag(-1, -1, "program has " + std::to_string(n_instr) + " instructions, IMEM holds " + std::to_string(m.imem_instructions));
  for (const auto& [name, idx] : p.labels)
    if (idx < 0 || idx > n_instr) diag(-1, -1, "label '" + name + "' points outside the program");
  for (const auto& d : p.data) {
    const int mem = m.find_memory(d.memory);
    if (mem < 0) {
      diag(-1, -1, "data directive targets unknown memory '" + d.memory + "'");
      continue;
    }
    if (d.address % 4 != 0) diag(-1, -1, "data directive address " + std::to_string(d.address) + " is not word aligned");
    if (d.address + 4ull * d.words.size() > m.memories[mem].bytes())
      diag(-1, -1, "data directive overruns memory '" + d.memory + "'");
  }

  for (std::size_t i = 0; i < p.instructions.size(); ++i) {
    const auto& ins = p.instructions[i];
    const int ii = static_cast<int>(i);
    if (ins.slots.size() != m.buses.size()) {
      diag(ii, -1, "slot-count mismatch: " + std::to_string(ins.slots.size()) + " slots for " +
                       std::to_string(m.buses.size()) + " buses");
      continue;
    }
    std::set<std::string> written;
    for (std::size_t s = 0; s < ins.slots.size(); ++s) {
      if (!ins.slots[s]) continue;
      const Move& mv = *ins.slots[s];
      const int si = static_cast<int>(s);
      const auto& bus = m.buses[s];
      const Domain bus_dom = domain_of(bus.width);

      const auto src = detail::source_info(mv.src, m);
      const auto dst = detail::dest_info(mv.dst, m);
      if (!src.error.empty()) diag(ii, si, src.error);
      if (!dst.error.empty()) diag(ii, si, dst.error);

      if (const auto* imm = std::get_if<Immediate>(&mv.src)) {
        if (bus.imm_bits == 0) {
          diag(ii, si, "width mismatch: immediate on " + std::string(bus_dom == Domain::Vector ? "vector" : "scalar") +
                           " bus " + std::to_string(s) + " without an immediate field");
        } else if (!detail::imm_fits(imm->value, bus.imm_bits)) {
          diag(ii, si, "immediate " + std::to_string(imm->value) + " does not fit " + std::to_string(bus.imm_bits) + " bits");
        }
        if (!imm->label.empty() && (imm->value < 0 || imm->value > n_instr))
          diag(ii, si, "label '" + imm->label + "' resolves outside the program");
      } else if (src.error.empty()) {
        if (domain_of(src.width) != bus_dom)
          diag(ii, si, "width mismatch: source '" + to_text(mv.src) + "' is " + std::to_string(src.width) +
                           "-bit on " + std::to_string(bus.width) + "-bit bus " + std::to_string(s));
        if (!m.connected(s, src.key)) diag(ii, si, "source '" + src.key + "' is not connected to bus " + std::to_string(s));
      }
      if (dst.error.empty()) {
        if (domain_of(dst.width) != bus_dom)
          diag(ii, si, "width mismatch: destination '" + to_text(mv.dst) + "' is " + std::to_string(dst.width) +
                           "-bit on " + std::to_string(bus.width) + "-bit bus " + std::to_string(s));
        if (!m.connected(s, dst.key))
          diag(ii, si, "destination '" + dst.key + "' is not connected to bus " + std::to_string(s));
        if (!written.insert(detail::write_key(mv.dst)).second)
          diag(ii, si, "write conflict: '" + detail::write_key(mv.dst) + "' written twice in one instruction");
      }
      if (mv.guard) {
        if (guard_rf < 0) diag(ii, si, "guarded move but the machine has no boolean register file");
        else if (mv.guard->index < 0 || mv.guard->index >= m.rfs[guard_rf].entries)
          diag(ii, si, "guard register b" + std::to_string(mv.guard->index) + " out of range");
      }
      if (const auto* t = std::get_if<TriggerRef>(&mv.dst); t && dst.error.empty()) {
        const auto kind = m.fus[m.find_fu(t->port.fu)].kind;
        if (kind == FuKind::Cu && t->opcode == "cjump" && !mv.guard) diag(ii, si, "cjump must be guarded");
        if (kind == FuKind::Cu && t->opcode == "loop") {
          if (const auto* imm = std::get_if<Immediate>(&mv.src)) {
            if (imm->value < 1 || imm->value > m.loopbuffer_entries)
              diag(ii, si, "loop body length " + std::to_string(imm->value) + " exceeds loopbuffer capacity " +
                               std::to_string(m.loopbuffer_entries));
            else if (static_cast<long long>(i) + imm->value >= n_instr)
              diag(ii, si, "loop body runs past the end of the program");
          }
        }
      }
    }
  }
  return out;
}

// Bits per instruction: for every bus, source field + destination field +
// guard field, each ceil(log2(choices)); the immediate width is added to the
// source field and the immediate counts as one source choice.
inline int encode_width(const MachineConfig& m) {
  int total = 0;
  const int grf = m.guard_rf();
  for (std::size_t b = 0; b < m.buses.size(); ++b) {
    const Domain d = domain_of(m.buses[b].width);
    long long srcs = m.buses[b].imm_bits > 0 ? 1 : 0;
    long long dsts = 0;
    for (const auto& key : b < m.connectivity.size() ? m.connectivity[b] : std::set<std::string>{}) {
      const auto dot = key.find('.');
      if (dot == std::string::npos) {
        const int rf = m.find_rf(key);
        if (rf < 0 || domain_of(m.rfs[rf].width) != d) continue;
        srcs += m.rfs[rf].entries;
        dsts += m.rfs[rf].entries;
        continue;
      }
      const int fu = m.find_fu(key.substr(0, dot));
      if (fu < 0) continue;
      const auto& ks = kind_spec(m.fus[fu].kind);
      const PortSpec* p = ks.port(key.substr(dot + 1));
      if (!p) continue;
      if (p->dir == PortDir::Trigger) {
        for (const auto& op : ks.opcodes) dsts += domain_of(op.trigger_width) == d ? 1 : 0;
      } else if (domain_of(p->width) == d) {
        (p->dir == PortDir::Out ? srcs : dsts) += 1;
      }
    }
    total += detail::ceil_log2(srcs) + m.buses[b].imm_bits + detail::ceil_log2(dsts);
    if (grf >= 0) total += detail::ceil_log2(2LL * m.rfs[grf].entries + 1);
  }
  return total;
}

inline int encode_width(const Program&, const MachineConfig& m) { return encode_width(m); }

}  // namespace braintta
