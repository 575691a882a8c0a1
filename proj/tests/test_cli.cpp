#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "braintta/assembler.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = BRAINTTA_CLI;
const std::string kSrc = BRAINTTA_SOURCE_DIR;

struct Out {
  int code = -1;
  std::string text;
};

Out cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " 2>&1";
  Out o;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return o;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) o.text.append(buf, n);
  const int st = pclose(p);
  o.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("braintta_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string sample(const std::string& f) { return kSrc + "/samples/" + f; }

}  // namespace

TEST(Cli, PeakThroughput) {
  const auto o = cli("peak");
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.text.find("614.4"), std::string::npos) << o.text;
  EXPECT_NE(o.text.find("307.2"), std::string::npos);
  EXPECT_NE(o.text.find("76.8"), std::string::npos);
}

TEST(Cli, AsmThenDisasmGivesCanonicalText) {
  const auto dir = scratch("asm");
  const auto art = dir / "sum.json";
  ASSERT_EQ(cli("asm " + sample("sum_loop.tta") + " -o " + art.string()).code, 0);
  const auto j = nlohmann::json::parse(slurp(art));
  EXPECT_EQ(j.at("instruction_bits"), 384);
  const auto o = cli("disasm " + art.string());
  ASSERT_EQ(o.code, 0);
  EXPECT_EQ(o.text, braintta::emit_asm(braintta::parse_asm(slurp(sample("sum_loop.tta")))));
}

TEST(Cli, DiagnosticsAndExitCodes) {
  const auto dir = scratch("diag");
  std::ofstream(dir / "bad.tta") << "nop ;\n#1 -> rf.99 ; ; ; ; ; ; ; ; ; ; ; ;\n";
  const auto bad = cli("asm " + (dir / "bad.tta").string());
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.text.find("bad.tta:2:1:"), std::string::npos) << bad.text;
  EXPECT_NE(bad.text.find("out of range"), std::string::npos);

  EXPECT_EQ(cli("asm " + (dir / "missing.tta").string()).code, 2);
  EXPECT_EQ(cli("peak --bogus").code, 2);
  std::ofstream(dir / "cost.json") << R"({"schema": "braintta.cost_table/1", "typo": 1})";
  EXPECT_EQ(cli("run --program " + sample("sum_loop.tta") + " --cost-table " + (dir / "cost.json").string() +
                " --out-dir " + dir.string())
                .code,
            2);
  std::ofstream(dir / "machine.json") << R"({"buses": []})";
  EXPECT_EQ(cli("--machine " + (dir / "machine.json").string() + " peak").code, 2);
}

TEST(Cli, RunWritesDeterministicArtifacts) {
  const auto a = scratch("run_a"), b = scratch("run_b");
  for (const auto& d : {a, b}) {
    const auto o = cli("run --program " + sample("sum_loop.tta") + " --trace --out-dir " + d.string());
    ASSERT_EQ(o.code, 0) << o.text;
  }
  for (const char* f : {"result.json", "energy.txt", "DMEM.hex", "PMEM.hex", "trace.txt"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_NE(slurp(a / "DMEM.hex").find("00000037"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(a / "result.json"));
  EXPECT_EQ(j.at("halt_reason"), "halted");
  EXPECT_EQ(j.at("cycles"), 43);
  EXPECT_GT(j.at("energy").at("total_fJ").get<double>(), 0.0);
}

TEST(Cli, RunStopsAtMaxCycles) {
  const auto d = scratch("maxc");
  const auto o = cli("run --program " + sample("sum_loop.tta") + " --max-cycles 10 --out-dir " + d.string());
  EXPECT_EQ(o.code, 1);
  EXPECT_EQ(nlohmann::json::parse(slurp(d / "result.json")).at("halt_reason"), "max_cycles");
}

TEST(Cli, RunLayerMatchesReference) {
  const auto d = scratch("layer");
  const auto o = cli("run --layer " + sample("conv_b_binarize.json") + " --seed 3 --out-dir " + d.string());
  ASSERT_EQ(o.code, 0) << o.text;
  const auto j = nlohmann::json::parse(slurp(d / "result.json"));
  EXPECT_EQ(j.at("oracle_mismatches"), 0);
  EXPECT_GT(j.at("energy").at("fJ_per_op").get<double>(), 0.0);
}

TEST(Cli, LoopbufferSwitchOnlyChangesImemEnergy) {
  const auto on = scratch("lb_on"), off = scratch("lb_off");
  ASSERT_EQ(cli("run --layer " + sample("dwconv_t.json") + " --out-dir " + on.string()).code, 0);
  ASSERT_EQ(cli("run --layer " + sample("dwconv_t.json") + " --no-loopbuffer --out-dir " + off.string()).code, 0);
  EXPECT_EQ(slurp(on / "DMEM.hex"), slurp(off / "DMEM.hex"));
  const auto a = nlohmann::json::parse(slurp(on / "result.json")).at("energy").at("components_fJ");
  const auto b = nlohmann::json::parse(slurp(off / "result.json")).at("energy").at("components_fJ");
  EXPECT_LT(a.at("IMEM").get<double>(), b.at("IMEM").get<double>());
  for (const char* c : {"vMAC", "interconnect", "DMEM", "PMEM", "RF", "other-logic"}) EXPECT_EQ(a.at(c), b.at(c)) << c;
}

TEST(Cli, GenProducesAssemblableKernel) {
  const auto d = scratch("gen");
  ASSERT_EQ(cli("gen " + sample("fc_i8.json") + " --seed 5 --out-dir " + d.string()).code, 0);
  for (const char* f : {"kernel.tta", "layout.json", "DMEM.hex", "PMEM.hex", "tensors.json"}) EXPECT_TRUE(fs::exists(d / f)) << f;
  EXPECT_EQ(cli("asm " + (d / "kernel.tta").string() + " -o " + (d / "k.json").string()).code, 0);
  const auto t = nlohmann::json::parse(slurp(d / "tensors.json"));
  EXPECT_EQ(t.at("expected").size(), 64u);
  EXPECT_EQ(cli("gen " + sample("missing.json")).code, 2);
}

TEST(Cli, VerifyBatchAndFaultInjection) {
  auto o = cli("verify --random-shapes --batch 3 --seed 9");
  EXPECT_EQ(o.code, 0) << o.text;
  EXPECT_NE(o.text.find("45/45 passed"), std::string::npos) << o.text;
  o = cli("verify " + sample("residual_e16.json") + " --batch 2");
  EXPECT_EQ(o.code, 0) << o.text;
  o = cli("verify " + sample("residual_e16.json") + " --inject-fault");
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.text.find("1 mismatches"), std::string::npos) << o.text;
}

TEST(Cli, InvalidLayerIsADomainError) {
  const auto d = scratch("badlayer");
  std::ofstream(d / "l.json") << R"({"kind": "conv", "mode": "b", "shape": {"W": 4, "H": 4, "C": 40, "M": 32}})";
  const auto o = cli("gen " + (d / "l.json").string() + " --out-dir " + d.string());
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.text.find("v_C"), std::string::npos) << o.text;
}
