#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "braintta/vec.hpp"

namespace braintta {

enum class PortKind : std::uint8_t { Input, Output, Trigger };

struct PortId {
  std::string fu;
  std::string port;
  PortKind kind = PortKind::Input;
  friend bool operator==(const PortId&, const PortId&) = default;
};

// A label reference keeps its name so emitted text stays symbolic.
struct Immediate {
  std::int32_t value = 0;
  std::string label;
  friend bool operator==(const Immediate&, const Immediate&) = default;
};

struct RegRef {
  std::string rf;
  int index = 0;
  friend bool operator==(const RegRef&, const RegRef&) = default;
};

struct TriggerRef {
  PortId port;
  std::string opcode;
  friend bool operator==(const TriggerRef&, const TriggerRef&) = default;
};

using Source = std::variant<Immediate, RegRef, PortId>;
using Destination = std::variant<RegRef, PortId, TriggerRef>;

// Executes when boolean register `index` equals `polarity`.
struct Guard {
  int index = 0;
  bool polarity = true;
  friend bool operator==(const Guard&, const Guard&) = default;
};

struct Move {
  Source src;
  Destination dst;
  std::optional<Guard> guard;
  friend bool operator==(const Move&, const Move&) = default;
};

// One optional move per bus.
struct Instruction {
  std::vector<std::optional<Move>> slots;

  bool empty() const {
    for (const auto& s : slots)
      if (s) return false;
    return true;
  }
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct DataDirective {
  std::string memory;
  std::uint32_t address = 0;
  std::vector<Word> words;
  friend bool operator==(const DataDirective&, const DataDirective&) = default;
};

struct Program {
  std::vector<Instruction> instructions;
  std::map<std::string, int> labels;
  std::vector<DataDirective> data;
  // Source line of each instruction when parsed from text; not part of equality.
  std::vector<int> source_lines;

  int line_of(std::size_t instr) const { return instr < source_lines.size() ? source_lines[instr] : 0; }

  friend bool operator==(const Program& a, const Program& b) {
    return a.instructions == b.instructions && a.labels == b.labels && a.data == b.data;
  }
};

struct Diagnostic {
  int line = 0;
  int col = 0;
  int instruction = -1;
  int slot = -1;
  std::string message;
};

inline std::string format_diagnostic(const Diagnostic& d, const std::string& file = "<input>") {
  std::string s = file + ":" + std::to_string(d.line) + ":" + std::to_string(d.col) + ": ";
  if (d.instruction >= 0) {
    s += "instruction " + std::to_string(d.instruction);
    if (d.slot >= 0) s += " slot " + std::to_string(d.slot);
    s += ": ";
  }
  return s + d.message;
}

// ---------------------------------------------------------------- text forms

inline std::string to_text(const Source& s) {
  if (const auto* imm = std::get_if<Immediate>(&s)) return "#" + (imm->label.empty() ? std::to_string(imm->value) : imm->label);
  if (const auto* r = std::get_if<RegRef>(&s)) return r->rf + "." + std::to_string(r->index);
  const auto& p = std::get<PortId>(s);
  return p.fu + "." + p.port;
}

inline std::string to_text(const Destination& d) {
  if (const auto* r = std::get_if<RegRef>(&d)) return r->rf + "." + std::to_string(r->index);
  if (const auto* p = std::get_if<PortId>(&d)) return p->fu + "." + p->port;
  const auto& t = std::get<TriggerRef>(d);
  return t.port.fu + ".t." + t.opcode;
}

inline std::string to_text(const Move& m) {
  std::string s;
  if (m.guard) s += (m.guard->polarity ? "?b" : "!b") + std::to_string(m.guard->index) + " ";
  return s + to_text(m.src) + " -> " + to_text(m.dst);
}

// Convenience constructors, mostly for generators and tests.
namespace mv {

inline Immediate imm(std::int64_t v) { return {static_cast<std::int32_t>(v), {}}; }
inline Immediate label(std::string name) { return {0, std::move(name)}; }
inline RegRef reg(std::string rf, int i) { return {std::move(rf), i}; }
inline PortId out(std::string fu, std::string port = "out") { return {std::move(fu), std::move(port), PortKind::Output}; }
inline PortId in(std::string fu, std::string port) { return {std::move(fu), std::move(port), PortKind::Input}; }
inline TriggerRef trig(std::string fu, std::string op) {
  return {{std::move(fu), "t", PortKind::Trigger}, std::move(op)};
}

}  // namespace mv

}  // namespace braintta
