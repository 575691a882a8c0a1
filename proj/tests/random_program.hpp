#pragma once

#include <random>
#include <string>
#include <vector>

#include "braintta/config.hpp"
#include "braintta/isa.hpp"

namespace testing_support {

using namespace braintta;

// Random syntactically valid program over the machine's names; not
// necessarily semantically valid.
inline Program random_program(std::mt19937_64& rng, const MachineConfig& m) {
  auto pick = [&](auto n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  Program p;
  const int n = 1 + pick(12);
  for (int l = 0, nl = pick(4); l < nl; ++l) p.labels["L" + std::to_string(l)] = pick(n + 1);
  std::vector<std::string> label_names;
  for (const auto& [k, v] : p.labels) label_names.push_back(k);

  auto random_port = [&](PortDir dir, bool& found) {
    PortId id;
    for (int tries = 0; tries < 64; ++tries) {
      const auto& fu = m.fus[static_cast<std::size_t>(pick(m.fus.size()))];
      const auto& ks = kind_spec(fu.kind);
      const auto& port = ks.ports[static_cast<std::size_t>(pick(ks.ports.size()))];
      if (port.dir != dir) continue;
      found = true;
      return PortId{fu.name, port.name, dir == PortDir::Out ? PortKind::Output : PortKind::Input};
    }
    found = false;
    return id;
  };

  for (int i = 0; i < n; ++i) {
    Instruction ins;
    ins.slots.resize(m.buses.size());
    for (auto& slot : ins.slots) {
      if (pick(3) == 0) continue;
      Move mv;
      switch (pick(4)) {
        case 0: mv.src = mv::imm(static_cast<std::int32_t>(rng())); break;
        case 1:
          if (!label_names.empty()) {
            const auto& name = label_names[static_cast<std::size_t>(pick(label_names.size()))];
            mv.src = Immediate{p.labels[name], name};
            break;
          }
          [[fallthrough]];
        case 2: {
          const auto& rf = m.rfs[static_cast<std::size_t>(pick(m.rfs.size()))];
          mv.src = mv::reg(rf.name, pick(rf.entries));
          break;
        }
        default: {
          bool ok = false;
          auto port = random_port(PortDir::Out, ok);
          if (ok) mv.src = port;
          else mv.src = mv::imm(0);
        }
      }
      switch (pick(3)) {
        case 0: {
          const auto& rf = m.rfs[static_cast<std::size_t>(pick(m.rfs.size()))];
          mv.dst = mv::reg(rf.name, pick(rf.entries));
          break;
        }
        case 1: {
          bool ok = false;
          auto port = random_port(PortDir::In, ok);
          if (ok) {
            mv.dst = port;
            break;
          }
          [[fallthrough]];
        }
        default: {
          const auto& fu = m.fus[static_cast<std::size_t>(pick(m.fus.size()))];
          const auto& ops = kind_spec(fu.kind).opcodes;
          mv.dst = mv::trig(fu.name, ops[static_cast<std::size_t>(pick(ops.size()))].name);
        }
      }
      if (pick(4) == 0) mv.guard = Guard{pick(4), pick(2) == 0};
      slot = mv;
    }
    p.instructions.push_back(std::move(ins));
  }
  if (pick(5) == 0) {
    DataDirective d{pick(2) ? "DMEM" : "PMEM", static_cast<std::uint32_t>(4 * pick(1000)), {}};
    for (int w = 0, nw = 1 + pick(5); w < nw; ++w) d.words.push_back(static_cast<Word>(rng()));
    p.data.push_back(d);
  }
  return p;
}

}  // namespace testing_support
