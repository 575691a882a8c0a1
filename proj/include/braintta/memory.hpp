#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "braintta/config.hpp"
#include "braintta/vec.hpp"

namespace braintta {

struct MemoryFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Word-interleaved banked SRAM: word address w lives in bank w mod banks.
class BankedMemory {
 public:
  BankedMemory() = default;
  explicit BankedMemory(const MemorySpec& spec) : spec_(spec), words_(spec.bytes() / 4, 0) {}

  const MemorySpec& spec() const { return spec_; }
  std::size_t size_bytes() const { return words_.size() * 4; }
  int bank_of(std::uint32_t byte_addr) const { return static_cast<int>((byte_addr / 4) % static_cast<std::uint32_t>(spec_.banks)); }

  // Throws MemoryFault on misalignment or out-of-range access. Accesses wider
  // than one word must be naturally aligned.
  void check_access(std::uint32_t addr, int nwords) const {
    if (nwords < 1 || nwords > kLanes) throw MemoryFault("access width must be 1..32 words");
    if (addr % 4 != 0) throw MemoryFault(spec_.name + ": unaligned address " + hex(addr));
    const std::uint32_t bytes = 4u * static_cast<std::uint32_t>(nwords);
    if (nwords > 1 && addr % std::bit_ceil(bytes) != 0)
      throw MemoryFault(spec_.name + ": " + std::to_string(32 * nwords) + "-bit access at " + hex(addr) +
                        " is not naturally aligned");
    if (static_cast<std::uint64_t>(addr) + bytes > size_bytes())
      throw MemoryFault(spec_.name + ": access at " + hex(addr) + " out of range");
  }

  Word read_word(std::uint32_t addr) const {
    check_access(addr, 1);
    return words_[addr / 4];
  }
  void write_word(std::uint32_t addr, Word w) {
    check_access(addr, 1);
    words_[addr / 4] = w;
  }

  // Little-endian word order: word i comes from addr + 4i.
  Vec1024 load(std::uint32_t addr, int nwords) const {
    check_access(addr, nwords);
    Vec1024 v;
    for (int i = 0; i < nwords; ++i) v.lane[i] = words_[addr / 4 + i];
    return v;
  }
  void store(std::uint32_t addr, int nwords, const Vec1024& v) {
    check_access(addr, nwords);
    for (int i = 0; i < nwords; ++i) words_[addr / 4 + i] = v.lane[i];
  }

  const std::vector<Word>& words() const { return words_; }
  std::vector<Word>& words() { return words_; }

  static std::string hex(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%x", v);
    return buf;
  }

 private:
  MemorySpec spec_;
  std::vector<Word> words_;
};

// ---------------------------------------------------------------- images
//
// "@HEXADDR" moves the byte cursor; every 8-hex-digit token is a word stored at
// the cursor, which then advances by 4. "//" starts a comment.

inline void load_image(BankedMemory& mem, std::istream& in) {
  std::uint64_t cursor = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto c = line.find("//"); c != std::string::npos) line.resize(c);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        if (tok[0] == '@') {
          cursor = std::stoull(tok.substr(1), &used, 16);
          if (used != tok.size() - 1) throw std::invalid_argument(tok);
          continue;
        }
        const auto w = std::stoull(tok, &used, 16);
        if (used != tok.size() || tok.size() > 8) throw std::invalid_argument(tok);
        if (cursor % 4 != 0 || cursor + 4 > mem.size_bytes())
          throw MemoryFault("image line " + std::to_string(line_no) + ": word outside " + mem.spec().name);
        mem.words()[cursor / 4] = static_cast<Word>(w);
        cursor += 4;
      } catch (const std::invalid_argument&) {
        throw MemoryFault("image line " + std::to_string(line_no) + ": bad token '" + tok + "'");
      } catch (const std::out_of_range&) {
        throw MemoryFault("image line " + std::to_string(line_no) + ": bad token '" + tok + "'");
      }
    }
  }
}

// Writes only runs of non-zero words, eight per line.
inline void dump_image(const BankedMemory& mem, std::ostream& out) {
  const auto& w = mem.words();
  std::size_t i = 0;
  char buf[16];
  while (i < w.size()) {
    if (w[i] == 0) {
      ++i;
      continue;
    }
    std::snprintf(buf, sizeof buf, "@%x", static_cast<unsigned>(i * 4));
    out << buf << '\n';
    int col = 0;
    while (i < w.size() && w[i] != 0) {
      std::snprintf(buf, sizeof buf, "%08x", w[i]);
      out << (col ? " " : "") << buf;
      if (++col == 8) {
        out << '\n';
        col = 0;
      }
      ++i;
    }
    if (col) out << '\n';
  }
}

}  // namespace braintta
