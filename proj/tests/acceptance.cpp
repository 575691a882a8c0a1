// One PASS/FAIL line per acceptance criterion; exit status 1 if any fail.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <regex>
#include <sstream>
#include <string>

#include "braintta/braintta.hpp"
#include "random_program.hpp"

using namespace braintta;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::pair<int, std::string> cli(const std::string& args) {
  const std::string cmd = std::string(BRAINTTA_CLI) + " " + args + " 2>&1";
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, ""};
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int st = pclose(p);
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

LayerDesc reference_layer(MacMode mode) {
  LayerDesc d;
  d.kind = LayerKind::Conv;
  d.mode = mode;
  d.shape = {16, 16, 128, 128, 3, 3, 1, 0};
  return d;
}

struct ReferenceRun {
  bool pass = false;
  std::string detail;
  EnergyReport energy;
  RunResult result;
  std::vector<Word> dmem, pmem;
};

ReferenceRun run_reference(MacMode mode, const MachineConfig& m) {
  ReferenceRun f;
  auto v = verify_layer(reference_layer(mode), m, 7);
  f.pass = v.pass;
  f.detail = v.stage + " " + v.detail;
  f.energy = account(v.run.result.event_log, default_cost_table(), v.run.ops, m.clock_mhz);
  f.dmem = v.run.state.memory(m, "DMEM").words();
  f.pmem = v.run.state.memory(m, "PMEM").words();
  f.result = std::move(v.run.result);
  return f;
}

int scalar_dot(MacMode m, Word a, Word w) {
  const auto x = packing::unpack_word(m, a), y = packing::unpack_word(m, w);
  int s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

}  // namespace

int main() {
  const MachineConfig m = default_config();

  // 1: peak throughput from the CLI
  {
    const auto [code, out] = cli("peak");
    const bool ok = code == 0 && out.find("614.4") != std::string::npos && out.find("307.2") != std::string::npos &&
                    out.find("76.8") != std::string::npos;
    report(1, ok, "peak GOPS b/t/i8 = 614.4/307.2/76.8",
           fmt("b %.1f t %.1f i8 %.1f (cli exit %d)", peak_gops(MacMode::B, m), peak_gops(MacMode::T, m),
               peak_gops(MacMode::I8, m), code));
  }

  // 2: random-shape verification batch from the CLI
  {
    const auto [code, out] = cli("verify --random-shapes --batch 100 --seed 1");
    const std::regex line(R"((\w+)\s+(\w+)\s+(\d+)/(\d+) bit-exact)");
    int groups = 0, clean = 0, total = 0;
    std::istringstream in(out);
    std::string l;
    std::smatch mt;
    while (std::getline(in, l))
      if (std::regex_search(l, mt, line)) {
        ++groups;
        const int pass = std::stoi(mt[3]), n = std::stoi(mt[4]);
        total += n;
        clean += pass == n && n >= 100 ? 1 : 0;
      }
    report(2, code == 0 && groups == 15 && clean == 15, "verify batch, >=100 random shapes per mode and layer kind",
           fmt("%d/15 kind-mode groups fully bit-exact, %d layers, exit %d", clean, total, code));
  }

  // 3, 5: energy per op and throughput on the reference binary/ternary/int8 conv
  const ReferenceRun fb = run_reference(MacMode::B, m);
  const ReferenceRun ft = run_reference(MacMode::T, m);
  const ReferenceRun fi = run_reference(MacMode::I8, m);
  {
    const double b = fb.energy.fj_per_op(), t = ft.energy.fj_per_op(), i8 = fi.energy.fj_per_op();
    const bool ok = fb.pass && ft.pass && fi.pass && t / b >= 1.8 && t / b <= 2.2 && std::abs(b - 35.0) <= 3.5 && i8 / t > 4.0;
    report(3, ok, "fJ/op shape: T/B in [1.8,2.2], B = 35 +-10%, I8/T > 4",
           fmt("B %.2f T %.2f I8 %.2f fJ/op, T/B %.3f, I8/T %.3f, outputs %s", b, t, i8, t / b, i8 / t,
               fb.pass && ft.pass && fi.pass ? "bit-exact" : "MISMATCH"));
  }

  // 4: loopbuffer ablation
  {
    MachineConfig off = m;
    off.loopbuffer_enabled = false;
    const ReferenceRun fo = run_reference(MacMode::B, off);
    bool others_equal = true;
    for (int c = 0; c < kComponents; ++c)
      if (c != static_cast<int>(Component::Imem) && fo.energy.component_fj[c] != fb.energy.component_fj[c]) others_equal = false;
    const double on_imem = fb.energy.fj(Component::Imem), off_imem = fo.energy.fj(Component::Imem);
    const bool ok = fo.pass && fo.dmem == fb.dmem && fo.pmem == fb.pmem && on_imem < off_imem && others_equal &&
                    fo.result.cycles == fb.result.cycles;
    report(4, ok, "loopbuffer on/off: same memory, lower IMEM energy, other components equal",
           fmt("IMEM %.4g vs %.4g fJ, memory %s, other components %s, cycles %llu/%llu", on_imem, off_imem,
               fo.dmem == fb.dmem && fo.pmem == fb.pmem ? "identical" : "DIFFERENT", others_equal ? "equal" : "DIFFER",
               static_cast<unsigned long long>(fb.result.cycles), static_cast<unsigned long long>(fo.result.cycles)));
  }

  {
    const double util = fb.result.mac_utilization(), gops = fb.energy.achieved_gops();
    report(5, fb.pass && util >= 0.5 && gops >= 307.0, "binary conv utilization >= 0.5 and >= 307 GOPS",
           fmt("utilization %.3f, %.1f GOPS over %llu cycles", util, gops, static_cast<unsigned long long>(fb.result.cycles)));
  }

  // 6: arithmetic identities
  {
    long long checked = 0, bad = 0;
    for (MacMode mode : {MacMode::B, MacMode::T, MacMode::I8}) {
      const int eb = packing::element_bits(mode);
      const Word mask = (Word{1} << eb) - 1;
      for (Word bg : {Word{0}, Word{0xa5c3e187u}})
        for (int pos = 0; pos < elements_per_word(mode); ++pos)
          for (Word ca = 0; ca <= mask; ++ca)
            for (Word cw = 0; cw <= mask; ++cw) {
              const Word a = (bg & ~(mask << (eb * pos))) | (ca << (eb * pos));
              const Word w = (~bg & ~(mask << (eb * pos))) | (cw << (eb * pos));
              ++checked;
              bad += funits::dot_lane(mode, a, w) != scalar_dot(mode, a, w);
            }
      std::mt19937_64 rng(1000 + static_cast<int>(mode));
      for (int i = 0; i < 100000; ++i) {
        const auto a = static_cast<Word>(rng()), w = static_cast<Word>(rng());
        ++checked;
        bad += funits::dot_lane(mode, a, w) != scalar_dot(mode, a, w);
        const Word canon = mode == MacMode::T ? packing::canonicalize_ternary(a) : a;
        bad += packing::pack_word(mode, packing::unpack_word(mode, a)) != canon;
      }
    }
    long long mono_bad = 0;
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      const auto mult = static_cast<std::int32_t>(1 + rng() % 65536);
      const int shift = static_cast<int>(rng() % 32);
      const auto zp = static_cast<std::int8_t>(static_cast<int>(rng() % 256) - 128);
      int prev = -1000;
      for (std::int64_t x = -(1 << 24); x <= (1 << 24); x += 1 + static_cast<std::int64_t>(rng() % 8192)) {
        const int q = funits::requant_i8_lane(static_cast<std::int32_t>(x), mult, shift, zp);
        mono_bad += q < prev;
        prev = q;
      }
    }
    const bool sat = funits::requant_i8_lane(1 << 30, 1, 0, 0) == 127 && funits::requant_i8_lane(-(1 << 30), 1, 0, 0) == -128 &&
                     funits::requant_i8_lane(100, 1, 0, 100) == 127 && funits::requant_i8_lane(-100, 1, 0, -100) == -128;
    report(6, bad == 0 && mono_bad == 0 && sat, "arithmetic identities, requant monotonicity and saturation, packing round trip",
           fmt("%lld dot/packing checks, %lld failures; monotonicity violations %lld; saturation %s", checked, bad, mono_bad,
               sat ? "ok" : "WRONG"));
  }

  // 7: assembler round trip and kernel validation
  {
    std::mt19937_64 rng(2718);
    int rt_bad = 0;
    for (int i = 0; i < 10000; ++i) {
      const Program p = testing_support::random_program(rng, m);
      try {
        rt_bad += parse_asm(emit_asm(p), m) == p ? 0 : 1;
      } catch (const AsmError&) {
        ++rt_bad;
      }
    }
    int kernels = 0, diag_total = 0;
    std::mt19937_64 lrng(99);
    for (auto k : {LayerKind::Conv, LayerKind::DwConv, LayerKind::Fc, LayerKind::Residual, LayerKind::Requant})
      for (MacMode mode : {MacMode::B, MacMode::T, MacMode::I8})
        for (int i = 0; i < 40; ++i) {
          ++kernels;
          diag_total += static_cast<int>(validate(gen_layer(random_layer(k, mode, lrng), m).program, m).size());
        }
    for (MacMode mode : {MacMode::B, MacMode::T, MacMode::I8}) {
      ++kernels;
      diag_total += static_cast<int>(validate(gen_layer(reference_layer(mode), m).program, m).size());
    }
    report(7, rt_bad == 0 && diag_total == 0, "parse(emit(p)) == p on 10^4 random programs; kernels validate cleanly",
           fmt("%d/10000 round-trip failures; %d diagnostics over %d generated kernels", rt_bad, diag_total, kernels));
  }

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
