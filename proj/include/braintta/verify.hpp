#pragma once

// Generate -> simulate -> compare, shared by the CLI and the tests.

#include <cstdint>
#include <random>
#include <string>

#include "braintta/energy.hpp"
#include "braintta/kernels.hpp"
#include "braintta/machine.hpp"
#include "braintta/oracle.hpp"

namespace braintta {

struct LayerRun {
  Generated gen;
  RunResult result;
  CoreState state;
  std::uint64_t ops = 0;
};

inline void apply_images(CoreState& s, const MachineConfig& m, const std::vector<DataDirective>& images) {
  for (const auto& d : images) {
    auto& mem = s.memory(m, d.memory);
    for (std::size_t i = 0; i < d.words.size(); ++i) mem.write_word(d.address + 4 * static_cast<std::uint32_t>(i), d.words[i]);
  }
}

inline LayerRun run_layer(const LayerDesc& d, const LayerTensors& t, const MachineConfig& m,
                          std::uint64_t max_cycles = 50'000'000, bool trace = false) {
  LayerRun r{gen_layer(d, m), {}, {}, ops_of_layer(d)};
  r.state = make_state(m, &r.gen.program);
  apply_images(r.state, m, pack_tensors(d, r.gen.layout, t));
  r.result = Core(m, r.gen.program).run(r.state, max_cycles, trace);
  return r;
}

struct VerifyOutcome {
  bool pass = false;
  std::string stage;  // where it failed
  std::string detail;
  oracle::MatchReport match;
  LayerRun run;
};

// Full pipeline for one layer and seed. `flip_bit` >= 0 corrupts that bit of
// the OFM region after the run.
inline VerifyOutcome verify_layer(const LayerDesc& d, const MachineConfig& m, std::uint64_t seed, long long flip_bit = -1) {
  VerifyOutcome v;
  LayerTensors t;
  try {
    t = random_tensors(d, seed);
    v.run = run_layer(d, t, m);
  } catch (const std::exception& e) {
    v.stage = "generate";
    v.detail = e.what();
    return v;
  }
  if (v.run.result.halt_reason != HaltReason::Halted) {
    v.stage = "run";
    v.detail = std::string(to_string(v.run.result.halt_reason)) + (v.run.result.error.empty() ? "" : ": " + v.run.result.error);
    return v;
  }
  auto& dmem = v.run.state.memory(m, "DMEM").words();
  if (flip_bit >= 0) {
    const auto bit = static_cast<std::uint64_t>(flip_bit) % (8ull * v.run.gen.layout.ofm_bytes);
    dmem[(v.run.gen.layout.ofm_addr + bit / 8) / 4] ^= 1u << (((v.run.gen.layout.ofm_addr + bit / 8) % 4) * 8 + bit % 8);
  }
  try {
    v.match = oracle::compare(dmem, oracle::layer_ref(d, t), v.run.gen.layout);
  } catch (const std::exception& e) {
    v.stage = "compare";
    v.detail = e.what();
    return v;
  }
  v.pass = v.match.ok();
  if (!v.pass) {
    v.stage = "compare";
    v.detail = v.match.summary();
  }
  return v;
}

}  // namespace braintta
