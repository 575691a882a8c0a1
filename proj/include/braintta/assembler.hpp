#pragma once

// Move-assembly text <-> Program.
//
//   label:
//   .data DMEM 0x100 0x00000001 0x00000002
//   ?b0 #5 -> salu.a ; rf.3 -> salu.t.add ; ; ... ;     one field per bus
//   nop ;                                               all slots empty
//
// "//" starts a comment. Immediates are decimal, 0x-hex or a label name.

#include <cctype>
#include <charconv>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "braintta/config.hpp"
#include "braintta/isa.hpp"

namespace braintta {

struct AsmError : std::runtime_error {
  std::vector<Diagnostic> diagnostics;

  explicit AsmError(std::vector<Diagnostic> diags)
      : std::runtime_error(diags.empty() ? "assembly error" : format_diagnostic(diags.front())),
        diagnostics(std::move(diags)) {}

  std::string report(const std::string& file = "<input>") const {
    std::string s;
    for (const auto& d : diagnostics) s += format_diagnostic(d, file) + "\n";
    return s;
  }
};

namespace detail {

inline bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

inline bool is_identifier(std::string_view s) {
  if (s.empty() || !is_ident_start(s[0])) return false;
  for (char c : s)
    if (!is_ident_char(c)) return false;
  return true;
}

inline bool is_number(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

// Parses decimal (optionally signed) or 0x-hex; accepts the int32 and uint32 ranges.
inline std::optional<std::int64_t> parse_int(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  if (v > 0xffffffffull) return std::nullopt;
  const std::int64_t r = neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
  if (r < std::numeric_limits<std::int32_t>::min()) return std::nullopt;
  return r;
}

struct Field {
  std::string_view text;
  int col;  // 1-based
};

inline Field trim(std::string_view s, int col) {
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  std::size_t e = s.size();
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return {s.substr(b, e - b), col + static_cast<int>(b)};
}

inline std::vector<Field> split_ws(Field f) {
  std::vector<Field> out;
  std::size_t i = 0;
  const auto s = f.text;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back({s.substr(i, j - i), f.col + static_cast<int>(i)});
    i = j;
  }
  return out;
}

class AsmParser {
 public:
  AsmParser(std::string_view text, const MachineConfig& cfg) : text_(text), cfg_(cfg) {}

  Program parse() {
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      auto nl = text_.find('\n', pos);
      if (nl == std::string_view::npos) nl = text_.size();
      ++line_no;
      parse_line(text_.substr(pos, nl - pos), line_no);
      pos = nl + 1;
    }
    resolve_labels();
    if (!diags_.empty()) throw AsmError(std::move(diags_));
    return std::move(prog_);
  }

 private:
  struct LabelUse {
    std::size_t instr;
    std::size_t slot;
    int line;
    int col;
  };

  void error(int line, int col, std::string msg) { diags_.push_back({line, col, -1, -1, std::move(msg)}); }

  void parse_line(std::string_view raw, int line) {
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (const auto c = raw.find("//"); c != std::string_view::npos) raw = raw.substr(0, c);
    Field f = trim(raw, 1);
    // leading "label:" prefixes
    while (!f.text.empty()) {
      std::size_t i = 0;
      while (i < f.text.size() && is_ident_char(f.text[i])) ++i;
      if (i == 0 || i >= f.text.size() || f.text[i] != ':' || !is_ident_start(f.text[0])) break;
      define_label(std::string(f.text.substr(0, i)), line, f.col);
      f = trim(f.text.substr(i + 1), f.col + static_cast<int>(i) + 1);
    }
    if (f.text.empty()) return;
    if (f.text.starts_with(".data")) {
      parse_data(f, line);
      return;
    }
    if (f.text.starts_with("nop")) {
      auto rest = trim(f.text.substr(3), f.col + 3);
      if (rest.text.empty() || rest.text == ";") {
        push_instruction(Instruction{std::vector<std::optional<Move>>(cfg_.buses.size())}, line);
        return;
      }
    }
    parse_instruction(f, line);
  }

  void define_label(std::string name, int line, int col) {
    if (prog_.labels.contains(name)) {
      error(line, col, "duplicate label '" + name + "'");
      return;
    }
    prog_.labels[name] = static_cast<int>(prog_.instructions.size());
  }

  void push_instruction(Instruction ins, int line) {
    prog_.instructions.push_back(std::move(ins));
    prog_.source_lines.push_back(line);
  }

  void parse_data(Field f, int line) {
    auto toks = split_ws(f);
    if (toks.size() < 3) {
      error(line, f.col, ".data expects: .data MEMORY ADDRESS WORD...");
      return;
    }
    DataDirective d;
    d.memory = std::string(toks[1].text);
    if (cfg_.find_memory(d.memory) < 0) error(line, toks[1].col, "unknown memory '" + d.memory + "'");
    const auto addr = parse_int(toks[2].text);
    if (!addr || *addr < 0) {
      error(line, toks[2].col, "invalid address '" + std::string(toks[2].text) + "'");
      return;
    }
    d.address = static_cast<std::uint32_t>(*addr);
    for (std::size_t i = 3; i < toks.size(); ++i) {
      const auto w = parse_int(toks[i].text);
      if (!w) {
        error(line, toks[i].col, "invalid data word '" + std::string(toks[i].text) + "'");
        return;
      }
      d.words.push_back(static_cast<Word>(static_cast<std::uint32_t>(*w)));
    }
    prog_.data.push_back(std::move(d));
  }

  void parse_instruction(Field f, int line) {
    std::vector<Field> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= f.text.size(); ++i) {
      if (i == f.text.size() || f.text[i] == ';') {
        fields.push_back(trim(f.text.substr(start, i - start), f.col + static_cast<int>(start)));
        start = i + 1;
      }
    }
    // Each slot is terminated by ';'; the empty tail after the last one is dropped.
    if (fields.size() > 1 && fields.back().text.empty()) fields.pop_back();
    if (fields.size() != cfg_.buses.size()) {
      error(line, f.col,
            "slot-count mismatch: " + std::to_string(fields.size()) + " slots, machine has " +
                std::to_string(cfg_.buses.size()) + " buses");
      return;
    }
    Instruction ins;
    ins.slots.resize(fields.size());
    const std::size_t idx = prog_.instructions.size();
    for (std::size_t s = 0; s < fields.size(); ++s) {
      if (fields[s].text.empty()) continue;
      ins.slots[s] = parse_move(fields[s], line, idx, s);
    }
    push_instruction(std::move(ins), line);
  }

  std::optional<Move> parse_move(Field f, int line, std::size_t instr, std::size_t slot) {
    Move m;
    auto t = f;
    if (t.text[0] == '?' || t.text[0] == '!') {
      std::size_t i = 1;
      while (i < t.text.size() && !std::isspace(static_cast<unsigned char>(t.text[i]))) ++i;
      auto g = t.text.substr(1, i - 1);
      if (g.size() < 2 || g[0] != 'b' || !is_number(g.substr(1))) {
        error(line, t.col, "malformed guard '" + std::string(t.text.substr(0, i)) + "' (expected ?bN or !bN)");
        return std::nullopt;
      }
      m.guard = Guard{std::stoi(std::string(g.substr(1))), t.text[0] == '?'};
      t = trim(t.text.substr(i), t.col + static_cast<int>(i));
    }
    const auto arrow = t.text.find("->");
    if (arrow == std::string_view::npos) {
      error(line, t.col, "expected 'SRC -> DST'");
      return std::nullopt;
    }
    const auto src = trim(t.text.substr(0, arrow), t.col);
    const auto dst = trim(t.text.substr(arrow + 2), t.col + static_cast<int>(arrow) + 2);
    auto s = parse_source(src, line, instr, slot);
    auto d = parse_dest(dst, line);
    if (!s || !d) return std::nullopt;
    m.src = std::move(*s);
    m.dst = std::move(*d);
    return m;
  }

  std::optional<Source> parse_source(Field f, int line, std::size_t instr, std::size_t slot) {
    if (f.text.empty()) {
      error(line, f.col, "missing move source");
      return std::nullopt;
    }
    if (f.text[0] == '#') {
      auto body = f.text.substr(1);
      if (is_identifier(body)) {
        uses_.push_back({instr, slot, line, f.col});
        return Source{Immediate{0, std::string(body)}};
      }
      const auto v = parse_int(body);
      if (!v) {
        error(line, f.col, "invalid immediate '" + std::string(f.text) + "'");
        return std::nullopt;
      }
      return Source{Immediate{static_cast<std::int32_t>(static_cast<std::uint32_t>(*v)), {}}};
    }
    const auto dot = f.text.find('.');
    if (dot == std::string_view::npos || f.text.find('.', dot + 1) != std::string_view::npos) {
      error(line, f.col, "malformed source '" + std::string(f.text) + "'");
      return std::nullopt;
    }
    const auto unit = f.text.substr(0, dot);
    const auto rest = f.text.substr(dot + 1);
    if (!is_identifier(unit)) {
      error(line, f.col, "lexical error in '" + std::string(f.text) + "'");
      return std::nullopt;
    }
    if (is_number(rest)) {
      if (!check_rf(unit, line, f.col)) return std::nullopt;
      return Source{RegRef{std::string(unit), std::stoi(std::string(rest))}};
    }
    if (!check_port(unit, rest, PortDir::Out, line, f.col)) return std::nullopt;
    return Source{PortId{std::string(unit), std::string(rest), PortKind::Output}};
  }

  std::optional<Destination> parse_dest(Field f, int line) {
    if (f.text.empty()) {
      error(line, f.col, "missing move destination");
      return std::nullopt;
    }
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= f.text.size(); ++i) {
      if (i == f.text.size() || f.text[i] == '.') {
        parts.push_back(f.text.substr(start, i - start));
        start = i + 1;
      }
    }
    for (auto p : parts) {
      if (!is_identifier(p) && !is_number(p)) {
        error(line, f.col, "lexical error in '" + std::string(f.text) + "'");
        return std::nullopt;
      }
    }
    if (parts.size() == 3 && parts[1] == "t") {
      if (!check_port(parts[0], "t", PortDir::Trigger, line, f.col)) return std::nullopt;
      const int fu = cfg_.find_fu(parts[0]);
      if (kind_spec(cfg_.fus[fu].kind).opcode_index(parts[2]) < 0) {
        error(line, f.col, "unknown opcode '" + std::string(parts[2]) + "' for unit '" + std::string(parts[0]) + "'");
        return std::nullopt;
      }
      return Destination{TriggerRef{{std::string(parts[0]), "t", PortKind::Trigger}, std::string(parts[2])}};
    }
    if (parts.size() != 2 || !is_identifier(parts[0])) {
      error(line, f.col, "malformed destination '" + std::string(f.text) + "'");
      return std::nullopt;
    }
    if (is_number(parts[1])) {
      if (!check_rf(parts[0], line, f.col)) return std::nullopt;
      return Destination{RegRef{std::string(parts[0]), std::stoi(std::string(parts[1]))}};
    }
    if (parts[1] == "t") {
      error(line, f.col, "trigger destination needs an opcode: '" + std::string(f.text) + ".<opcode>'");
      return std::nullopt;
    }
    if (!check_port(parts[0], parts[1], PortDir::In, line, f.col)) return std::nullopt;
    return Destination{PortId{std::string(parts[0]), std::string(parts[1]), PortKind::Input}};
  }

  bool check_rf(std::string_view name, int line, int col) {
    if (cfg_.find_rf(name) >= 0) return true;
    error(line, col, "unknown register file '" + std::string(name) + "'");
    return false;
  }

  bool check_port(std::string_view fu, std::string_view port, PortDir dir, int line, int col) {
    const int idx = cfg_.find_fu(fu);
    const PortSpec* p = idx >= 0 ? kind_spec(cfg_.fus[idx].kind).port(port) : nullptr;
    if (idx < 0 || !p) {
      error(line, col, "unknown port '" + std::string(fu) + "." + std::string(port) + "'");
      return false;
    }
    const bool ok = dir == PortDir::Out ? p->dir == PortDir::Out : dir == PortDir::Trigger ? p->dir == PortDir::Trigger : p->dir == PortDir::In;
    if (!ok) {
      error(line, col,
            "port '" + std::string(fu) + "." + std::string(port) + "' cannot be used as a " +
                (dir == PortDir::Out ? "source" : "destination"));
      return false;
    }
    return true;
  }

  void resolve_labels() {
    for (const auto& u : uses_) {
      auto& imm = std::get<Immediate>(prog_.instructions[u.instr].slots[u.slot]->src);
      const auto it = prog_.labels.find(imm.label);
      if (it == prog_.labels.end()) {
        error(u.line, u.col, "unresolved label '" + imm.label + "'");
        continue;
      }
      imm.value = it->second;
    }
  }

  std::string_view text_;
  const MachineConfig& cfg_;
  Program prog_;
  std::vector<LabelUse> uses_;
  std::vector<Diagnostic> diags_;
};

inline std::string hex32(std::uint32_t v, bool pad = true) {
  char buf[16];
  std::snprintf(buf, sizeof buf, pad ? "0x%08x" : "0x%x", v);
  return buf;
}

}  // namespace detail

// Throws AsmError carrying every diagnostic found.
inline Program parse_asm(std::string_view text, const MachineConfig& cfg) { return detail::AsmParser(text, cfg).parse(); }

inline Program parse_asm(std::string_view text) {
  static const MachineConfig cfg = default_config();
  return parse_asm(text, cfg);
}

inline std::string emit_asm(const Program& p) {
  std::ostringstream os;
  os << "// braintta move assembly\n";
  for (const auto& d : p.data) {
    os << ".data " << d.memory << " " << detail::hex32(d.address, false);
    for (Word w : d.words) os << " " << detail::hex32(w);
    os << "\n";
  }
  std::multimap<int, std::string> by_index;
  for (const auto& [name, idx] : p.labels) by_index.emplace(idx, name);
  auto emit_labels = [&](int idx) {
    auto [b, e] = by_index.equal_range(idx);
    for (auto it = b; it != e; ++it) os << it->second << ":\n";
  };
  for (std::size_t i = 0; i < p.instructions.size(); ++i) {
    emit_labels(static_cast<int>(i));
    const auto& ins = p.instructions[i];
    if (ins.empty()) {
      os << "nop ;\n";
      continue;
    }
    for (std::size_t s = 0; s < ins.slots.size(); ++s) {
      if (s) os << ' ';
      if (ins.slots[s]) os << to_text(*ins.slots[s]) << ' ';
      os << ';';
    }
    os << '\n';
  }
  for (const auto& [idx, name] : by_index)
    if (idx >= static_cast<int>(p.instructions.size())) os << name << ":\n";
  return os.str();
}

}  // namespace braintta
