#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "braintta/config.hpp"

namespace braintta {

enum class EventKind : std::uint8_t { ImemFetch, LoopbufReplay, Move, FuOp, RfAccess, SramBank, IdleCycle };

enum class RfWidthClass : std::uint8_t { Bool, Scalar, Vector };

constexpr RfWidthClass rf_width_class(int width) {
  return width == kBoolWidth ? RfWidthClass::Bool : width == kScalarWidth ? RfWidthClass::Scalar : RfWidthClass::Vector;
}

// Compact event record. Field meaning depends on kind:
//   ImemFetch:  value = instruction bits
//   Move:       flag = 1 for a vector bus
//   FuOp:       unit = FuKind, sub = opcode index within the kind
//   RfAccess:   flag = 1 for write, sub = RfWidthClass
//   SramBank:   flag = 1 for write, unit = memory index in EventLog::memories, sub = bank
struct EnergyEvent {
  EventKind kind = EventKind::IdleCycle;
  std::uint8_t flag = 0;
  std::uint16_t unit = 0;
  std::uint16_t sub = 0;
  std::uint32_t value = 0;
  std::uint64_t cycle = 0;

  friend bool operator==(const EnergyEvent&, const EnergyEvent&) = default;
};

struct EventLog {
  std::vector<EnergyEvent> events;
  std::vector<std::string> memories;

  void append(const EventLog& other) {
    if (memories.empty()) memories = other.memories;
    events.insert(events.end(), other.events.begin(), other.events.end());
  }
  std::size_t count(EventKind k) const {
    std::size_t n = 0;
    for (const auto& e : events) n += e.kind == k ? 1 : 0;
    return n;
  }
  friend bool operator==(const EventLog&, const EventLog&) = default;
};

}  // namespace braintta
